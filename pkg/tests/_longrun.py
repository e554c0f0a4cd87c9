"""Memoised long trajectories shared by the acceptance tests.

A run is stored as its batch-means matrix under ``.acceptance_cache/`` and
keyed by the run config together with a hash of every piece of code that
influences the trajectory or the per-sample observables.  Changing any of
that code invalidates the cache, so a cached result is always what the
current code would produce.

Usage: ``python tests/_longrun.py nonlinear 7 8 9`` or ``... linear``.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import sys
import time
from pathlib import Path

import numpy as np

from nlsflux import diagnostics as dg, kernels, runner
from nlsflux.config import RunConfig

CACHE = Path(__file__).resolve().parent.parent / ".acceptance_cache"
SRC = Path(inspect.getfile(runner)).parent

NONLINEAR = dict(d=2, lam=1.0, m=64, nu=0.1, sigma=0.5, dt=0.01, t_burn=200.0, t_avg=5000.0)
LINEAR = dict(d=2, lam=1.0, m=64, nu=0.1, sigma=0.5, dt=0.01, t_burn=200.0, t_avg=2000.0,
              nonlinear=False)


def code_hash() -> str:
    h = hashlib.sha256()
    for name in ("spectral.py", "model.py", "integrator.py", "kernels.py", "_kernels.pyx",
                 "_kernels_py.py", "stats.py"):
        h.update((SRC / name).read_bytes())
    for obj in (dg.ShellDiagnostics, dg._Layout, dg.DiagnosticTrace, dg.step_dissipation_symbol,
                runner.run_trajectory, runner._advance,
                runner.make_ensemble, runner.make_diagnostics):
        h.update(inspect.getsource(obj).encode())
    h.update(kernels.BACKEND.encode())
    return h.hexdigest()[:16]


def config_for(kind: str, seed: int) -> RunConfig:
    base = NONLINEAR if kind == "nonlinear" else LINEAR
    return RunConfig.from_mapping({**base, "seed": seed})


def _path(cfg: RunConfig) -> Path:
    return CACHE / f"{cfg.content_hash()[:16]}-{code_hash()}.npz"


def get_trace(kind: str, seed: int, compute: bool = True):
    """Returns (cfg, trace, seconds) or None when uncached and compute=False."""
    cfg = config_for(kind, seed)
    path = _path(cfg)
    if path.exists():
        data = np.load(path)
        ens = runner.make_ensemble(cfg)
        diag = runner.make_diagnostics(cfg, ens)
        tr = dg.DiagnosticTrace.from_batches(diag, 0.0, float(data["t_end"]), data["batches"],
                                             tag=str(seed))
        return cfg, tr, float(data["seconds"])
    if not compute:
        return None
    t0 = time.perf_counter()
    _, tr, _ = runner.run_trajectory(cfg)
    secs = time.perf_counter() - t0
    CACHE.mkdir(exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, batches=tr.batches, t_end=tr.acc.t_end, seconds=secs,
             meta=json.dumps(cfg.resolved(), sort_keys=True))
    tmp.rename(path)
    return cfg, tr, secs


if __name__ == "__main__":
    kind = sys.argv[1]
    for s in [int(x) for x in sys.argv[2:]] or [7]:
        cfg, tr, secs = get_trace(kind, s)
        print(f"{kind} seed {s}: {secs:.0f} s -> {_path(cfg).name}", flush=True)
