import pytest

from nlsflux.config import RunConfig
from nlsflux.model import ConfigurationError


def test_defaults_resolve():
    cfg = RunConfig()
    assert cfg.resolved_sample_every == 10
    assert cfg.resolved_t_burn == pytest.approx(5 / (0.1 * 1.25))


def test_text_roundtrip():
    cfg = RunConfig.from_mapping({"nu": 0.05, "sweep_sigma": "0.5, 0.4", "slope_ranges": "2:8,3:12",
                                  "forcing_count": "4", "nonlinear": "no"})
    back = RunConfig.from_text(cfg.to_text())
    # the text form is fully resolved, so compare resolved views
    assert back.resolved() == cfg.resolved() and back.content_hash() == cfg.content_hash()
    assert RunConfig.from_text(back.to_text()) == back
    assert back.sweep_sigma == (0.5, 0.4) and back.slope_ranges == ((2.0, 8.0), (3.0, 12.0))
    assert back.nonlinear is False and back.forcing_count == 4


def test_file_with_section_and_overrides(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[run]\nnu = 0.2\nm = 32\n")
    cfg = RunConfig.from_file(f, {"seed": "11"})
    assert (cfg.nu, cfg.m, cfg.seed) == (0.2, 32, 11)
    g = tmp_path / "bare.ini"
    g.write_text("# comment\nsigma = 0.3\n")
    assert RunConfig.from_file(g).sigma == 0.3


@pytest.mark.parametrize("bad", [
    {"nu": "-1"}, {"m": "15"}, {"padding": "3"}, {"scheme": "rk4"}, {"cutoff": "blunt"},
    {"unknown_key": "1"}, {"m": "abc"}, {"slope_ranges": "3"}, {"sweep_mode": "cross"},
    {"annulus_lo": "2", "annulus_hi": "1"},
])
def test_invalid_values_raise(bad):
    with pytest.raises(ConfigurationError):
        RunConfig.from_mapping(bad)


def test_out_is_not_part_of_the_hash():
    a = RunConfig.from_mapping({"out": "x"})
    b = RunConfig.from_mapping({"out": "y"})
    assert a.content_hash() == b.content_hash()
