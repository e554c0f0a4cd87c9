import json
import sys
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from nlsflux import spectral as sp  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def oracles():
    return json.loads((HERE / "oracles" / "oracles.json").read_text())


def field_from(grid, modes, coefs):
    c = np.zeros(grid.shape, complex)
    for n, (re, im) in zip(modes, coefs):
        c.ravel()[grid.flat_index(n)] = re + 1j * im
    return sp.SpectralField(grid, c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
