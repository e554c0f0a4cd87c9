"""Deterministic verification battery behind ``nlsflux verify``.

Every check is exact or uses a closed-form oracle, runs in seconds, and
reports a named pass/fail with the measured value and its tolerance.
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as dg, kernels, spectral as sp
from .config import RunConfig
from .integrator import (Stepper, TrajectoryState, exact_linear_spectrum, load_checkpoint,
                         save_checkpoint)
from .model import SimParams, build_forcing, hamiltonian, validate_forcing, wave_action
from .stats import BatchMeans


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def _rng(seed=1234):
    return np.random.default_rng(seed)


def random_band_field(grid: sp.TorusGrid, rng, decay: float = 0.0, amp: float = 1.0) -> sp.SpectralField:
    c = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    if decay:
        c *= np.exp(-grid.ksq / decay)
    return sp.SpectralField(grid, c * grid.band * amp * grid.volume)


def sparse_field(grid: sp.TorusGrid, modes, rng) -> sp.SpectralField:
    c = np.zeros(grid.shape, complex)
    for n in modes:
        c.ravel()[grid.flat_index(n)] = (rng.normal() + 1j * rng.normal()) * grid.volume
    return sp.SpectralField(grid, c)


def convolution_cubic(u: sp.SpectralField) -> np.ndarray:
    """Band coefficients of |u|^2 u by direct triple sum over the support of u."""
    g = u.grid
    idx = np.argwhere(np.abs(u.coeff) > 0)
    n = np.where(idx >= g.m // 2, idx - g.m, idx)
    vals = u.coeff[tuple(idx.T)]
    out = np.zeros(g.shape, complex)
    for a in range(len(n)):
        for b in range(len(n)):
            for c in range(len(n)):
                tot = n[a] - n[b] + n[c]
                if np.all(np.abs(tot) < g.m // 2):
                    out[tuple(tot % g.m)] += vals[a] * np.conj(vals[b]) * vals[c]
    return out / g.volume**2


def convolution_quartic(u: sp.SpectralField) -> float:
    """mean |u|^4 from the same oracle: sum_k |(|u|^2 u)-free quartic pairing."""
    g = u.grid
    idx = np.argwhere(np.abs(u.coeff) > 0)
    n = np.where(idx >= g.m // 2, idx - g.m, idx)
    vals = u.coeff[tuple(idx.T)] / g.volume
    tot = 0.0 + 0.0j
    L = len(n)
    for a in range(L):
        for b in range(L):
            for c in range(L):
                for d in range(L):
                    if np.all(n[a] - n[b] + n[c] - n[d] == 0):
                        tot += vals[a] * np.conj(vals[b]) * vals[c] * np.conj(vals[d])
    return float(tot.real)


def richardson(f_of_dt, dt: float) -> tuple[float, float, float]:
    """Errors at dt and dt/2 and their ratio."""
    e1, e2 = abs(f_of_dt(dt)), abs(f_of_dt(dt / 2))
    ratio = e1 / e2 if e2 > 0 else float("inf")
    return e1, e2, ratio


# ---------------------------------------------------------------------------


def _checks(cfg: RunConfig) -> list[Check]:
    out: list[Check] = []
    add = out.append
    tol = cfg.verify_tol
    rng = _rng()

    g16 = sp.TorusGrid(2, 1.0, 16)
    # 1-3: transforms
    vals = rng.normal(size=g16.shape) + 1j * rng.normal(size=g16.shape)
    f = sp.PhysicalField(g16, vals)
    F = sp.forward_transform(f)
    pars = abs(np.mean(np.abs(vals) ** 2) - sp.norm_sq(F.coeff, g16)) / np.mean(np.abs(vals) ** 2)
    add(Check("parseval", pars <= tol, pars, tol))
    back = sp.inverse_transform(F).values
    rt = float(np.max(np.abs(back - vals)) / np.max(np.abs(vals)))
    add(Check("transform_roundtrip", rt <= tol, rt, tol))
    u = random_band_field(g16, rng)
    pt = sp.padded(g16, cfg.padding)
    prt = float(np.max(np.abs(pt.to_spectral(pt.to_physical(u.coeff)) - u.coeff)) / np.max(np.abs(u.coeff)))
    add(Check("padded_roundtrip", prt <= tol, prt, tol))

    # 4-5: dealiasing oracle on fields whose interactions leave the band
    modes = [(6, 5), (-7, 3), (5, -6)]
    u3 = sparse_field(g16, modes, rng)
    ref = convolution_cubic(u3)
    got = pt.cubic(u3.coeff)
    err = float(np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
    add(Check("dealiased_cubic_vs_convolution", err <= tol, err, tol,
              f"padding={cfg.padding}"))
    q_ref = convolution_quartic(u3)
    q = pt.mean_abs_pow(u3.coeff, 4)
    qe = abs(q - q_ref) / q_ref
    add(Check("quartic_quadrature_vs_convolution", qe <= tol, qe, tol, f"padding={cfg.padding}"))

    # 6-10: Littlewood-Paley algebra
    filt = sp.LPFilter(g16, cfg.cutoff)
    ladder = [2.0**j for j in range(-2, 5)]
    tele = filt.low(ladder[0]) + sum(filt.shell(N) for N in ladder[:-1])
    te = float(np.max(np.abs(tele - filt.low(ladder[-1]))))
    add(Check("lp_telescoping", te <= tol, te, tol))
    r = np.linspace(0, 3, 3001)
    ps = sp.psi(r)
    ok = bool(np.all((ps >= 0) & (ps <= 1)) and np.all(ps[r <= 1] == 1) and np.all(ps[r >= 2] == 0)
              and np.all(np.diff(ps) <= 0))
    add(Check("psi_profile", ok, float(ok), 1.0, "0<=psi<=1, plateau, support, monotone"))
    sh = filt.shell(2.0)
    supp = float(np.max(np.abs(sh[(g16.kabs < 2.0) | (g16.kabs > 8.0)]))) if cfg.cutoff == "smooth" else 0.0
    add(Check("lp_shell_support", supp <= tol, supp, tol, "P_N supported in N <= |k| <= 4N"))
    v = random_band_field(g16, rng)
    orth = abs(sp.norm_sq(v.coeff * filt.low(1.0), g16) + sp.norm_sq(v.coeff * filt.high(1.0), g16)
               + 2 * sp.norm_sq(v.coeff, g16, filt.low(1.0) * filt.high(1.0)) - sp.norm_sq(v.coeff, g16))
    orth /= sp.norm_sq(v.coeff, g16)
    add(Check("lp_low_high_split", orth <= tol, orth, tol))
    v0 = sp.SpectralField(g16, v.coeff * (g16.kabs > 0))
    sharp = dg.lp_orthogonality_defect(v0, sp.LPFilter(g16, "sharp"))
    smooth = dg.lp_orthogonality_defect(v0, sp.LPFilter(g16, "smooth"))
    add(Check("lp_sharp_shell_orthogonality", abs(sharp) <= tol, abs(sharp), tol,
              f"smooth-cutoff defect {smooth:.3e} (reported, not asserted)"))

    # 11: Bernstein suite on random fields at two box sizes
    worst = 0.0
    for lam in (1.0, 2.0):
        g = sp.TorusGrid(2, lam, 32)
        for _ in range(3):
            w = random_band_field(g, rng, decay=40.0)
            for N in (0.5, 1.0, 2.0, 4.0):
                for p, q in ((2, 2), (2, 4)):
                    rep = sp.bernstein_suite(w, N, p, q)
                    worst = max(worst, rep.worst if np.isfinite(rep.worst) else 0.0)
    add(Check("bernstein_B1_B5", worst <= 10.0, worst, 10.0))

    # 12-13: forcing ensemble and linear closed form
    p64 = SimParams(nu=cfg.nu, sigma=cfg.sigma, m=32, dt=1e-3)
    ens = build_forcing(p64.grid)
    fr = validate_forcing(ens)
    add(Check("forcing_localisation", fr.passed, float(fr.passed), 1.0,
              "mean-zero, annulus, phase-complete, vanishing low/high mass"))
    lin = exact_linear_spectrum(ens, p64.nu, p64.sigma)
    le = abs(lin.wa_dissipation - lin.sigma2_eps_wa) / lin.sigma2_eps_wa
    add(Check("ou_wave_action_identity", le <= tol, le, tol))

    # 14-17: conservative integrator
    st = Stepper(p64, ens, padding=cfg.padding)
    u0 = random_band_field(p64.grid, rng, decay=8.0, amp=0.5)
    s = TrajectoryState(u0.copy(), 0.0, None, p64)
    wa0, h0 = wave_action(u0), hamiltonian(u0, p64.sigma).total
    step_err = 0.0
    for _ in range(200):
        before = wave_action(s.u)
        st.deterministic(s)
        step_err = max(step_err, abs(wave_action(s.u) - before) / wa0)
    add(Check("wave_action_per_step", step_err <= tol, step_err, tol))
    he = abs(hamiltonian(s.u, p64.sigma).total - h0) / abs(h0)
    add(Check("hamiltonian_drift_T0.2", he <= 1e-6, he, 1e-6))
    for _ in range(200):
        st.deterministic(s, -p64.dt)
    rev = float(np.max(np.abs(s.u.coeff - u0.coeff)) / np.max(np.abs(u0.coeff)))
    add(Check("time_reversibility", rev <= 1e-10, rev, 1e-10))

    def h_err(dt):
        t = TrajectoryState(u0.copy(), 0.0, None, p64)
        n = int(round(0.1 / dt))
        for _ in range(n):
            st.deterministic(t, dt)
        return hamiltonian(t.u, p64.sigma).total - h0

    e1, e2, ratio = richardson(h_err, 0.01)
    add(Check("hamiltonian_second_order", abs(ratio - 4) <= 0.8, ratio, 0.8, "ratio 4 +- 20%"))

    # 18-22: flux-derivative identities and the exact zeros of the fluxes
    uf = random_band_field(p64.grid, rng, decay=8.0, amp=0.5)
    diag_filt = sp.LPFilter(p64.grid, cfg.cutoff)
    for label, fn, fl in _flux_pairs(p64, diag_filt, cfg):
        worst_ratio, worst_rel = _flux_fd(st, uf, p64, fn, fl)
        ok = worst_rel < 0.1 and worst_ratio <= 0.8
        add(Check(f"flux_derivative_{label}", ok, worst_ratio, 0.8,
                  f"max |ratio-4| over N in 1/2..4; worst rel error {worst_rel:.2e}"))
    pih = dg.flux_h(uf, 1e6, p64.sigma, diag_filt, padding=cfg.padding, form=cfg.flux_form)
    scale = abs(dg.flux_h(uf, 1.0, p64.sigma, diag_filt, padding=cfg.padding))
    add(Check("flux_h_vanishes_full_band", abs(pih) <= 1e-10 * scale, abs(pih), 1e-10 * scale,
              f"form={cfg.flux_form}"))
    u_mz = sp.SpectralField(p64.grid, uf.coeff * (p64.grid.kabs > 0))
    piw = dg.flux_wa(u_mz, 1e-3, diag_filt, padding=cfg.padding)
    add(Check("flux_wa_vanishes_below_modes", abs(piw) <= 1e-10 * scale, abs(piw), 1e-10 * scale))

    # 23-24: one-step OU kernel and the batch-means estimator
    add(_ou_kernel_check(rng))
    acc = BatchMeans(0.0, 10.0, 10)
    for i in range(1, 101):
        acc.accumulate(2.5, i * 0.1)
    est = acc.finalize()
    add(Check("batch_means_constant", est.stderr == 0 and est.mean == 2.5, est.stderr, 0.0))

    # 25: determinism and checkpoint resume
    add(_determinism_check())
    # 26: compiled and pure kernels agree
    add(_backend_check(rng))
    return out


def _flux_pairs(p, filt, cfg):
    from .spectral import norm_sq

    g = p.grid

    def f_wa(u, N):
        h = filt.high(N)
        return 0.5 * norm_sq(u.coeff, g, h * h)

    def f_ke(u, N):
        lo = filt.low(N)
        return 0.5 * norm_sq(u.coeff, g, g.ksq * lo * lo)

    def f_h(u, N):
        return hamiltonian(sp.SpectralField(g, u.coeff * filt.low(N)), p.sigma, cfg.padding).total

    return [
        ("wa", f_wa, lambda u, N: dg.flux_wa(u, N, filt, padding=cfg.padding)),
        ("ke", f_ke, lambda u, N: dg.flux_ke(u, N, filt, padding=cfg.padding)),
        ("h", f_h, lambda u, N: dg.flux_h(u, N, p.sigma, filt, padding=cfg.padding, form=cfg.flux_form)),
    ]


def flux_fd_error(st: Stepper, u, sigma, fn, fl, N, dt) -> float:
    """Centered difference of fn over +-dt plus sigma * flux at the centre."""
    up = st.deterministic(TrajectoryState(u.copy(), 0.0, None, st.params), dt).u
    um = st.deterministic(TrajectoryState(u.copy(), 0.0, None, st.params), -dt).u
    return (fn(up, N) - fn(um, N)) / (2 * dt) + sigma * fl(u, N)


def _flux_fd(st, u, p, fn, fl, shells=(0.5, 1.0, 2.0, 4.0), dt=4e-3):
    worst_ratio, worst_rel = 0.0, 0.0
    for N in shells:
        ref = abs(p.sigma * fl(u, N))
        e1 = flux_fd_error(st, u, p.sigma, fn, fl, N, dt)
        e2 = flux_fd_error(st, u, p.sigma, fn, fl, N, dt / 2)
        scale = max(ref, 1e-300)
        if abs(e1) < 1e-12 * max(scale, 1.0) and abs(e2) < 1e-12 * max(scale, 1.0):
            continue  # identity exact (both sides vanish)
        worst_rel = max(worst_rel, abs(e2) / scale if ref > 0 else abs(e2))
        worst_ratio = max(worst_ratio, abs(abs(e1 / e2) - 4.0) if e2 else math.inf)
    return worst_ratio, worst_rel


def _ou_kernel_check(rng) -> Check:
    """One linear step from a fixed u0: mean and variance of a forced mode."""
    p = SimParams(nu=0.3, sigma=0.7, m=16, dt=0.05)
    ens = build_forcing(p.grid)
    st = Stepper(p, ens, nonlinear=False)
    pos = st.forced_pos[0]
    u0 = sp.SpectralField(p.grid, np.zeros(p.grid.shape, complex))
    u0.coeff.ravel()[pos] = 3.0 + 1.0j
    n = 4000
    s = TrajectoryState(u0.copy(), 0.0, np.random.default_rng(99), p)
    xs = np.empty(n, complex)
    for i in range(n):
        s.u = u0.copy()
        st.stochastic(s)
        xs[i] = s.u.coeff.ravel()[pos]
    k2 = p.grid.ksq.ravel()[pos]
    D = 1 + k2
    mean = u0.coeff.ravel()[pos] * np.exp((1j * k2 - p.nu * D) * p.dt)
    var = st.G2[0] * (1 - np.exp(-2 * p.nu * D * p.dt)) / (2 * p.nu * D)
    z_mean = abs(xs.mean() - mean) / math.sqrt(var / n)
    v_hat = np.mean(np.abs(xs - mean) ** 2)
    z_var = abs(v_hat - var) / (var * math.sqrt(1.0 / n))  # |z|^2 is exponential: sd = var
    z = max(z_mean, z_var)
    return Check("ou_one_step_kernel", z <= 4.0, z, 4.0, "z-scores of mean and variance")


def _determinism_check() -> Check:
    cfg = RunConfig(m=16, t_avg=2.0, t_burn=1.0, dt=0.01, n_batches=10, seed=3)
    from .runner import run_trajectory

    a = run_trajectory(cfg)[2].u.coeff
    b = run_trajectory(cfg)[2].u.coeff
    same = bool(np.array_equal(a, b))
    # checkpoint resume must continue bit-for-bit
    params = cfg.params()
    ens = build_forcing(params.grid)
    st = Stepper(params, ens)
    s = TrajectoryState.initial(params)
    for _ in range(20):
        st.stochastic(s)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ck.json"
        save_checkpoint(path, s)
        r = load_checkpoint(path, params)
    for _ in range(20):
        st.stochastic(s)
        st.stochastic(r)
    resumed = bool(np.array_equal(s.u.coeff, r.u.coeff))
    ok = same and resumed
    return Check("determinism_and_resume", ok, float(ok), 1.0,
                 f"replay identical={same}, checkpoint resume identical={resumed}")


def _backend_check(rng) -> Check:
    from . import _kernels_py

    if "cython" not in kernels.available_backends():
        return Check("kernel_backends_agree", True, 0.0, 1e-13, "compiled backend not built")
    from . import _kernels as kc

    z = rng.normal(size=4096) + 1j * rng.normal(size=4096)
    w = rng.random(4096)
    o1, o2 = np.empty_like(z), np.empty_like(z)
    kc.cubic(z, o1)
    _kernels_py.cubic(z, o2)
    errs = [np.max(np.abs(o1 - o2)) / np.max(np.abs(o2))]
    for fn in ("weighted_norm2", "weighted_im_inner", "weighted_re_inner"):
        args = (z, w) if fn == "weighted_norm2" else (z, z[::-1].copy(), w)
        a, b = getattr(kc, fn)(*args), getattr(_kernels_py, fn)(*args)
        errs.append(abs(a - b) / max(abs(b), 1e-300))
    e = float(max(errs))
    return Check("kernel_backends_agree", e <= 1e-12, e, 1e-12)


def run_battery(cfg: RunConfig, report_path=None) -> tuple[bool, list[Check]]:
    t0 = time.perf_counter()
    checks = _checks(cfg)
    passed = all(c.passed for c in checks)
    if report_path is not None:
        rep = {
            "passed": passed,
            "n_checks": len(checks),
            "failed": [c.name for c in checks if not c.passed],
            "settings": {"padding": cfg.padding, "flux_form": cfg.flux_form, "cutoff": cfg.cutoff,
                         "verify_tol": cfg.verify_tol},
            "checks": [{k: (bool(v) if k == "passed" else (float(v) if k in ("value", "tolerance") else v))
                        for k, v in asdict(c).items()} for c in checks],
        }
        Path(report_path).write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    _ = time.perf_counter() - t0
    return passed, checks
