"""Orchestration of simulate / sweep / spectrum runs and their output files."""

from __future__ import annotations

import itertools
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, diagnostics as dg, kernels
from .config import RunConfig
from .integrator import (StabilityError, StabilityWarning, Stepper, TrajectoryState,
                         load_checkpoint, params_hash, save_checkpoint)
from .model import ConfigurationError, ForcingEnsemble, build_forcing
from .spectral import LPFilter, shell_ladder

log = logging.getLogger("nlsflux")


@dataclass
class RunResult:
    config: RunConfig
    ensemble: ForcingEnsemble
    trace: dg.DiagnosticTrace
    balance: dg.BalanceReport
    flux: dg.FluxCurve
    spectrum: dg.ShellSpectrum
    indicators: dg.CascadeIndicators
    state: TrajectoryState
    out_dir: Path | None


def make_ensemble(cfg: RunConfig) -> ForcingEnsemble:
    grid = cfg.params().grid
    rng = np.random.default_rng([int(cfg.seed), 0x5EED])
    return build_forcing(grid, (cfg.annulus_lo, cfg.annulus_hi), cfg.forcing_count,
                         cfg.eps_wa, rng=rng)


def make_diagnostics(cfg: RunConfig, ens: ForcingEnsemble) -> dg.ShellDiagnostics:
    grid = ens.grid
    shells = sorted(set(shell_ladder(grid, cfg.shell_min_exp)) | set(cfg.balance_shells)
                    | {cfg.n_low, cfg.n_high})
    step = (cfg.nu, cfg.dt) if cfg.scheme == "strang" else None
    return dg.ShellDiagnostics(ens, cfg.sigma, shells, LPFilter(grid, cfg.cutoff),
                               cfg.padding, cfg.flux_form, step=step)


def _advance(stepper: Stepper, state: TrajectoryState, n_steps: int, relax: bool,
             on_step=None):
    with warnings.catch_warnings():
        if relax:
            warnings.simplefilter("ignore", StabilityWarning)
        for i in range(1, n_steps + 1):
            stepper.stochastic(state)
            if on_step is not None:
                on_step(i, state)


def run_trajectory(cfg: RunConfig, state: TrajectoryState | None = None,
                   burn: bool = True) -> tuple:
    """Burn-in plus averaging window; returns (ensemble, trace, final state)."""
    params = cfg.params()
    ens = make_ensemble(cfg)
    stepper = Stepper(params, ens, scheme=cfg.scheme, nonlinear=cfg.nonlinear,
                      strict=not cfg.relax, padding=cfg.padding)
    state = state if state is not None else TrajectoryState.initial(params)
    n_burn = int(round(params.t_burn / params.dt)) if burn else 0
    n_avg = int(round(params.t_avg / params.dt))
    every = cfg.resolved_sample_every
    log.info("burn-in: %d steps", n_burn)
    _advance(stepper, state, n_burn, cfg.relax)
    diag = make_diagnostics(cfg, ens)
    trace = dg.DiagnosticTrace(diag, 0.0, n_avg * params.dt, cfg.n_batches, tag=str(cfg.seed))

    def sample(i, s):
        if i % every == 0:
            trace.add(s.u.coeff, i * params.dt, stepper.midpoint)

    log.info("averaging: %d steps, sampling every %d", n_avg, every)
    _advance(stepper, state, n_avg, cfg.relax, sample)
    return ens, trace, state


def analyse(cfg: RunConfig, trace: dg.DiagnosticTrace) -> dict:
    params = cfg.params()
    bal = dg.stationary_flux_balance(trace, params, shells=cfg.balance_shells)
    flux = dg.flux_curve(trace, params.sigma)
    spec = dg.power_spectrum(trace, params)
    ind = dg.cascade_indicators(trace, params)
    return {"balance": bal, "flux": flux, "spectrum": spec, "indicators": ind}


def _manifest(cfg: RunConfig, ens: ForcingEnsemble, extra: dict | None = None) -> dict:
    params = cfg.params()
    out = {
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "params": params.to_dict(),
        "params_hash": params_hash(params),
        "config_hash": cfg.content_hash(),
        "forcing": {"hash": ens.content_hash(), "profiles": len(ens),
                    "eps_wa": ens.eps_wa, "eps_ke": ens.eps_ke},
    }
    if extra:
        out.update(extra)
    return out


def write_outputs(out_dir: Path, cfg: RunConfig, ens: ForcingEnsemble, parts: dict,
                  state: TrajectoryState, extra: dict | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    dg.write_flux_curve(out_dir / "flux_curve.csv", parts["flux"])
    dg.write_balance(out_dir / "balance.csv", parts["balance"])
    dg.write_spectrum(out_dir / "spectrum.csv", parts["spectrum"])
    dg.write_indicators(out_dir / "indicators.csv", parts["indicators"])
    if cfg.slope_ranges:
        sp = parts["spectrum"]
        dg.write_slopes(out_dir / "slopes.csv",
                        [dg.fit_slope(sp.k_shell, sp.E_density, r) for r in cfg.slope_ranges])
    (out_dir / "config.resolved").write_text(cfg.to_text())
    (out_dir / "config.json").write_text(cfg.to_json() + "\n")
    bal = parts["balance"]
    summary = {"balance_passed": bal.passed,
               "wa_residual": bal.wa_residual, "h_residual": bal.h_residual}
    summary.update(extra or {})
    (out_dir / "manifest.json").write_text(
        json.dumps(_manifest(cfg, ens, summary), sort_keys=True, indent=2) + "\n")
    save_checkpoint(out_dir / "checkpoint.json", state)
    if cfg.plots:
        from . import plots

        plots.flux_plot(out_dir / "flux_curve.png", parts["flux"])
        plots.spectrum_plot(out_dir / "spectrum.png", parts["spectrum"])


def simulate(cfg: RunConfig, out_dir=None) -> RunResult:
    """Run one trajectory; raises StabilityError unless ``cfg.relax``."""
    ens, trace, state = run_trajectory(cfg)
    parts = analyse(cfg, trace)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        write_outputs(out, cfg, ens, parts, state)
    return RunResult(cfg, ens, trace, parts["balance"], parts["flux"], parts["spectrum"],
                     parts["indicators"], state, out)


def spectrum(cfg: RunConfig, out_dir, checkpoint=None) -> RunResult:
    """Spectrum run, resuming from a checkpoint (no burn-in) when given."""
    state = None
    if checkpoint is not None:
        state = load_checkpoint(checkpoint)
        if params_hash(state.params) != params_hash(cfg.params()):
            state.params = cfg.params()  # resume the field, but under this config
    ens, trace, state = run_trajectory(cfg, state, burn=checkpoint is None)
    parts = analyse(cfg, trace)
    out = Path(out_dir)
    write_outputs(out, cfg.replace(plots=True), ens, parts, state)
    return RunResult(cfg, ens, trace, parts["balance"], parts["flux"], parts["spectrum"],
                     parts["indicators"], state, out)


# ---------------------------------------------------------------------------
# sweeps


def sweep_points(cfg: RunConfig) -> list[dict]:
    nus = cfg.sweep_nu or (cfg.nu,)
    sigmas = cfg.sweep_sigma or (cfg.sigma,)
    lams = cfg.sweep_lam or (cfg.lam,)
    if cfg.sweep_mode == "zip":
        n = max(len(nus), len(sigmas), len(lams))
        for name, seq in (("sweep_nu", nus), ("sweep_sigma", sigmas), ("sweep_lam", lams)):
            if len(seq) not in (1, n):
                raise ConfigurationError(f"{name} has {len(seq)} entries; zip sweep needs 1 or {n}")
        pick = lambda seq, i: seq[0] if len(seq) == 1 else seq[i]  # noqa: E731
        pts = [(pick(nus, i), pick(sigmas, i), pick(lams, i)) for i in range(n)]
    else:
        pts = list(itertools.product(nus, sigmas, lams))
    if not pts:
        raise ConfigurationError("sweep grid is empty")
    return [{"nu": a, "sigma": b, "lam": c} for a, b, c in pts]


REGIME_COLUMNS = ["point", "nu", "sigma", "lam", "nu_over_sigma2", "status",
                  "wa_residual", "wa_residual_err", "h_residual", "h_residual_err",
                  "low_dissipation_fraction", "low_dissipation_fraction_err",
                  "high_dissipation_fraction", "high_dissipation_fraction_err",
                  "low_dissipation_fraction_linear_exact", "high_dissipation_fraction_linear_exact",
                  "l2van", "l2van_err", "l4van", "l4van_err", "pekiller", "pekiller_err",
                  "eps_H", "eps_H_err"]


def _sweep_point(args) -> dict:
    index, base_text, point, out_dir = args
    cfg = RunConfig.from_text(base_text, {k: repr(v) for k, v in point.items()})
    row = {"point": index, **point, "nu_over_sigma2": point["nu"] / point["sigma"] ** 2}
    try:
        res = simulate(cfg, Path(out_dir) / f"point_{index:03d}")
        diag = res.trace.diag
        jl, jh = diag.shells.index(cfg.n_low), diag.shells.index(cfg.n_high)
        bal = res.balance
        wa, h = bal.row("WABal"), bal.row("Hbal")
        ind = res.indicators
        lin = dg.linear_indicator_oracle(res.ensemble, cfg.params(), [cfg.n_low, cfg.n_high])
        row.update({
            "status": "ok",
            "wa_residual": wa.residual.mean / wa.injection,
            "wa_residual_err": wa.residual.stderr / wa.injection,
            "h_residual": h.residual.mean / h.injection,
            "h_residual_err": h.residual.stderr / h.injection,
            "low_dissipation_fraction": ind.low_dissipation_fraction[jl].mean,
            "low_dissipation_fraction_err": ind.low_dissipation_fraction[jl].stderr,
            "high_dissipation_fraction": ind.high_dissipation_fraction[jh].mean,
            "high_dissipation_fraction_err": ind.high_dissipation_fraction[jh].stderr,
            "low_dissipation_fraction_linear_exact": float(lin["low_dissipation_fraction"][0]),
            "high_dissipation_fraction_linear_exact": float(lin["high_dissipation_fraction"][1]),
        })
        for key in ("l2van", "l4van", "pekiller"):
            row[key] = ind.weak_nl[key].mean
            row[key + "_err"] = ind.weak_nl[key].stderr
        row["eps_H"], row["eps_H_err"] = ind.eps_H.mean, ind.eps_H.stderr
    except (StabilityError, ConfigurationError, FloatingPointError, ValueError) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def sweep(cfg: RunConfig, out_dir, workers: int | None = None) -> list[dict]:
    """Run every grid point (in parallel) and write regime_table.csv in point order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = sweep_points(cfg)
    base = cfg.to_text()
    jobs = [(i, base, p, str(out)) for i, p in enumerate(points)]
    n = workers if workers is not None else (cfg.sweep_workers or os.cpu_count() or 1)
    n = max(1, min(n, len(jobs)))
    if n == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    rows.sort(key=lambda r: r["point"])
    dg._write(out / "regime_table.csv", REGIME_COLUMNS,
              [[r.get(c) if not isinstance(r.get(c), str) else r[c] for c in REGIME_COLUMNS]
               for r in rows])
    (out / "config.resolved").write_text(base)
    trend = trend_report(rows)
    (out / "trend_report.json").write_text(json.dumps(trend, sort_keys=True, indent=2) + "\n")
    return rows


def trend_report(rows: list[dict]) -> dict:
    """Descriptive monotonicity of each indicator along the sweep order."""
    ok = [r for r in rows if r.get("status") == "ok"]
    out = {"points": len(rows), "succeeded": len(ok)}
    for key in ("nu_over_sigma2", "low_dissipation_fraction", "high_dissipation_fraction",
                "l2van", "l4van", "pekiller"):
        vals = [r[key] for r in ok if r.get(key) is not None]
        diffs = np.diff(vals) if len(vals) > 1 else np.array([])
        if diffs.size == 0:
            trend = "n/a"
        elif np.all(diffs < 0):
            trend = "decreasing"
        elif np.all(diffs > 0):
            trend = "increasing"
        else:
            trend = "mixed"
        out[key] = trend
    return out
