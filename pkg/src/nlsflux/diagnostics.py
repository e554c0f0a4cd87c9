"""Scale-by-scale fluxes, stationary balance residuals, spectra and regime indicators.

Sign convention: under the conservative flow,

    d/dt 1/2 |u_{>=N}|^2     = -sigma Pi_WA(N)
    d/dt 1/2 |grad u_{<=N}|^2 = -sigma Pi_KE(N)
    d/dt H[u_{<=N}]          = -sigma Pi_H(N)

so a positive Pi_WA means wave action leaving the high frequencies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from . import kernels
from .model import ConfigurationError, ForcingEnsemble, SimParams, dissipation_symbol
from .spectral import (LPFilter, SpectralField, TorusGrid, default_filter, norm_sq, padded,
                       shell_ladder)
from .stats import BatchMeans, StationaryEstimate

FLUX_FORMS = ("corrected", "literal")
KZ_REFERENCES = (-1.0 / 3.0, -1.0)


def _flat(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


def _cflat(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.complex128).ravel()


def _negate_k(a: np.ndarray) -> np.ndarray:
    """b(k) = a(-k) for an FFT-ordered array."""
    axes = tuple(range(a.ndim))
    return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def flux_wa(u: SpectralField, N: float, filt: LPFilter | None = None,
            F: np.ndarray | None = None, padding: int = 2) -> float:
    """Pi_WA(N) = Im mean(conj(P_{>=N} u) P_{>=N}(|u|^2 u))."""
    g = u.grid
    filt = filt or default_filter(g)
    F = padded(g, padding).cubic(u.coeff) if F is None else F
    h = filt.high(N)
    return kernels.weighted_im_inner(_cflat(u.coeff), _cflat(F), _flat(h * h)) / g.volume**2


def flux_ke(u: SpectralField, N: float, filt: LPFilter | None = None,
            F: np.ndarray | None = None, padding: int = 2) -> float:
    """Pi_KE(N) = -Im mean(Lap conj(u_{<=N}) P_{<=N}(|u|^2 u))."""
    g = u.grid
    filt = filt or default_filter(g)
    F = padded(g, padding).cubic(u.coeff) if F is None else F
    lo = filt.low(N)
    return kernels.weighted_im_inner(_cflat(u.coeff), _cflat(F), _flat(g.ksq * lo * lo)) / g.volume**2


def flux_h(u: SpectralField, N: float, sigma: float, filt: LPFilter | None = None,
           F: np.ndarray | None = None, padding: int = 2, form: str = "corrected") -> float:
    """Hamiltonian flux through scale N.

    With v = P_{<=N} u and C = |v|^2 v,

        Pi_H = -Im mean(Lap conj(v) (P_{<=N}(|u|^2 u) - C))
               + sigma Im mean(conj(P_{<=N}(|u|^2 u)) C).

    ``form="literal"`` drops the conjugation in the second term; that
    variant does not vanish when P_{<=N} is the identity and exists only so
    the flux-derivative check can demonstrate the difference.
    """
    if form not in FLUX_FORMS:
        raise ValueError(f"form must be one of {FLUX_FORMS}")
    g = u.grid
    filt = filt or default_filter(g)
    pt = padded(g, padding)
    F = pt.cubic(u.coeff) if F is None else F
    lo = filt.low(N)
    v = u.coeff * lo
    C = pt.cubic(v)
    PF = lo * F
    first = kernels.weighted_im_inner(_cflat(v), _cflat(PF - C), _flat(g.ksq))
    if form == "corrected":
        second = kernels.weighted_im_inner(_cflat(C), _cflat(PF), _flat(np.ones(g.shape)))
    else:
        second = float(np.sum(PF * _negate_k(C)).imag)
    return (first + sigma * second) / g.volume**2


def lp_orthogonality_defect(u: SpectralField, filt: LPFilter | None = None,
                            n_min: int = -6) -> float:
    """(||u||^2 - sum_N ||P_N u||^2) / ||u||^2 over the dyadic ladder.

    The lowest piece P_{<=2^n_min} u is counted as one more shell.  Zero for
    the sharp cutoff; for the smooth one it is the overlap of neighbouring
    shells, which is positive because every shell multiplier lies in [0, 1].
    """
    g = u.grid
    filt = filt or default_filter(g)
    ladder = shell_ladder(g, n_min)
    total = sum(norm_sq(u.coeff, g, filt.shell(N) ** 2) for N in ladder)
    total += norm_sq(u.coeff, g, filt.low(ladder[0]) ** 2)
    ref = norm_sq(u.coeff, g, g.band.astype(float))
    return (ref - total) / ref


# ---------------------------------------------------------------------------
# per-sample observables


@dataclass
class _Layout:
    """Slices of the flat observable vector."""

    scalars: tuple[str, ...]
    shell_names: tuple[str, ...]
    n_shells: int
    n_modes: int

    def __post_init__(self):
        self.index = {name: i for i, name in enumerate(self.scalars)}
        off = len(self.scalars)
        self.shell_slice = {}
        for name in self.shell_names:
            self.shell_slice[name] = slice(off, off + self.n_shells)
            off += self.n_shells
        self.mode_slice = slice(off, off + self.n_modes)
        self.size = off + self.n_modes


SCALARS = ("wave_action", "hamiltonian", "wa_diss", "ke_diss", "pe_direct", "pe_decomposed",
           "ito", "l4_4", "l4_sq", "gradu_l4_4", "pekiller", "l2")
SHELL_OBS = ("pi_wa", "pi_ke", "pi_h", "wa_high", "wa_low", "ke_low", "ke_high",
             "pe_direct_v", "v_l2", "pi_wa_end", "pi_ke_end")


def step_dissipation_symbol(grid: TorusGrid, nu: float, dt: float) -> np.ndarray:
    """sinh(nu D dt) / (nu dt): the damping symbol seen by the Strang chain.

    Sampled at step ends, the chain obeys the per-mode stationary law
    E|u_k|^2 = S_k + T_k / (2 sinh(nu D_k dt)), with S_k the OU variance and
    T_k the mean change of |u_k|^2 over one cubic substep.  Quadratic
    dissipation integrals taken with this symbol therefore balance the
    midpoint fluxes exactly, where nu D leaves an O(dt) bias at shells with
    nu D dt of order one.  It equals D + O(dt^2).
    """
    x = nu * dissipation_symbol(grid) * dt
    return np.sinh(x) / (nu * dt)


class ShellDiagnostics:
    """Evaluates every per-sample observable on a fixed shell ladder.

    Shells whose cutoff multipliers coincide on the retained band share one
    evaluation of |v|^2 v.  With ``step=(nu, dt)`` the quadratic dissipation
    integrals and the matching injection terms use
    :func:`step_dissipation_symbol`; without it they use D.
    """

    def __init__(self, ens: ForcingEnsemble, sigma: float, shells=None,
                 filt: LPFilter | None = None, padding: int = 2, form: str = "corrected",
                 modes: bool = True, step: tuple[float, float] | None = None):
        g = ens.grid
        self.grid, self.ens, self.sigma = g, ens, float(sigma)
        self.filt = filt or default_filter(g)
        self.shells = tuple(float(N) for N in (shells or shell_ladder(g)))
        if any(b <= a for a, b in zip(self.shells, self.shells[1:])):
            raise ConfigurationError("shells must be strictly increasing")
        self.pt = padded(g, padding)
        self.form = form
        self.V2 = g.volume**2
        band = g.band
        D_true = dissipation_symbol(g)
        self.step = step
        D = (D_true if step is None else step_dissipation_symbol(g, *step)) * band
        self.D = _flat(D_true * band)
        self.D_diss = _flat(D)
        self.kD = _flat(g.ksq * D)
        self.ksq = _flat(g.ksq * band)
        self.ones = _flat(band)
        self.abs_sq = ens.abs_sq_sum()
        self.lows, self.w = [], []
        groups: dict[bytes, int] = {}
        self.group_of = []
        for N in self.shells:
            lo = self.filt.low(N) * band
            key = np.round(lo, 15).tobytes()
            self.group_of.append(groups.setdefault(key, len(groups)))
            hi = band * (1.0 - lo)
            self.lows.append(lo)
            self.w.append({
                "lo": _flat(lo),
                "wa_high": _flat(hi * hi * D),
                "wa_low": _flat(lo * lo * D),
                "ke_low": _flat(lo * lo * g.ksq * D),
                "ke_high": _flat(hi * hi * g.ksq * D),
                "hi2": _flat(hi * hi),
                "k2lo2": _flat(g.ksq * lo * lo),
                "k2lo": _flat(g.ksq * lo),
                "Dlo": _flat(D * lo),
                "lo2": _flat(lo * lo),
            })
        self.keep_modes = modes
        self.layout = _Layout(SCALARS, SHELL_OBS, len(self.shells), g.m**g.d if modes else 0)
        # deterministic injection profiles per shell
        flat = np.array([g.flat_index(n) for n in ens.modes], dtype=np.intp)
        # scale |a_j|^2 by D_step/D so injection matches the dissipation symbol
        a2 = np.abs(ens.amplitudes) ** 2 * (D.ravel()[flat] / D_true.ravel()[flat])
        self.inj_wa_total = 0.5 * float(np.sum(a2))
        k2 = ens.k_abs**2
        self.inj_ke_total = 0.5 * float(np.sum(k2 * a2))
        self.inj_wafb = np.array([0.5 * np.sum((1 - lo.ravel()[flat]) ** 2 * a2) for lo in self.lows])
        self.inj_ke = np.array([0.5 * np.sum(lo.ravel()[flat] ** 2 * k2 * a2) for lo in self.lows])
        a2_true = np.abs(ens.amplitudes) ** 2
        self.ito_factor = np.array([np.sum(lo.ravel()[flat] ** 2 * a2_true) for lo in self.lows])

    def sample(self, coeff: np.ndarray, mid: np.ndarray | None = None) -> np.ndarray:
        """Observables of state ``coeff``.

        Fluxes are evaluated at ``mid`` (the state the last cubic substep
        acted on) when given; the endpoint fluxes are kept as pi_*_end.
        """
        g, pt, V2, s = self.grid, self.pt, self.V2, self.sigma
        L = self.layout
        out = np.empty(L.size)
        c = _cflat(coeff)
        z = pt.to_physical(coeff)
        a2 = z.real**2 + z.imag**2
        g2 = 0.0
        cross = 0.0
        for i in range(g.d):
            gz = pt.to_physical(1j * g.k[i] * coeff)
            g2 = g2 + gz.real**2 + gz.imag**2
            cross = cross + np.conj(gz) ** 2
        l2 = float(a2.mean())
        l4_4 = float(np.mean(a2 * a2))
        ugu = float(np.mean(a2 * g2))
        crs = float(np.mean((cross * z * z).real))
        gl4 = float(np.mean(g2 * g2))
        F = _cflat(pt.to_spectral(a2 * z, overwrite=True))
        if mid is None:
            cm, Fm, base = c, F, coeff
        else:
            base = np.asarray(mid).reshape(g.shape)
            cm = _cflat(base)
            Fm = _cflat(pt.cubic(base))
        kin = kernels.weighted_norm2(c, self.ksq) / V2
        sc = out[: len(SCALARS)]
        idx = L.index
        sc[idx["l2"]] = l2
        sc[idx["wave_action"]] = 0.5 * kernels.weighted_norm2(c, self.ones) / V2
        sc[idx["hamiltonian"]] = 0.5 * kin + 0.25 * s * l4_4
        sc[idx["wa_diss"]] = kernels.weighted_norm2(c, self.D_diss) / V2
        sc[idx["ke_diss"]] = kernels.weighted_norm2(c, self.kD) / V2
        sc[idx["pe_direct"]] = kernels.weighted_re_inner(c, F, self.D) / V2
        sc[idx["pe_decomposed"]] = l4_4 + 2.0 * ugu + crs
        sc[idx["ito"]] = l2 * self.abs_sq
        sc[idx["l4_4"]] = l4_4
        sc[idx["l4_sq"]] = math.sqrt(l4_4)
        sc[idx["gradu_l4_4"]] = gl4
        sc[idx["pekiller"]] = math.sqrt(l4_4) * math.sqrt(gl4)

        shell = {name: out[L.shell_slice[name]] for name in SHELL_OBS}
        cache: dict[int, np.ndarray] = {}
        for j, w in enumerate(self.w):
            grp = self.group_of[j]
            pair = cache.get(grp)
            if pair is None:
                C = _cflat(pt.cubic(coeff * self.lows[j]))
                Cm = C if mid is None else _cflat(pt.cubic(base * self.lows[j]))
                cache[grp] = (C, Cm)
            else:
                C, Cm = pair
            v = c * w["lo"]
            pi_ke = kernels.weighted_im_inner(cm, Fm, w["k2lo2"])
            shell["pi_wa"][j] = kernels.weighted_im_inner(cm, Fm, w["hi2"]) / V2
            shell["pi_ke"][j] = pi_ke / V2
            shell["pi_wa_end"][j] = kernels.weighted_im_inner(c, F, w["hi2"]) / V2
            shell["pi_ke_end"][j] = kernels.weighted_im_inner(c, F, w["k2lo2"]) / V2
            first = pi_ke - kernels.weighted_im_inner(cm, Cm, w["k2lo"])
            if self.form == "corrected":
                second = kernels.weighted_im_inner(Cm, Fm, w["lo"])
            else:
                second = float(np.sum(w["lo"] * Fm * _negate_k(Cm.reshape(g.shape)).ravel()).imag)
            shell["pi_h"][j] = (first + s * second) / V2
            shell["wa_high"][j] = kernels.weighted_norm2(c, w["wa_high"]) / V2
            shell["wa_low"][j] = kernels.weighted_norm2(c, w["wa_low"]) / V2
            shell["ke_low"][j] = kernels.weighted_norm2(c, w["ke_low"]) / V2
            shell["ke_high"][j] = kernels.weighted_norm2(c, w["ke_high"]) / V2
            shell["pe_direct_v"][j] = kernels.weighted_re_inner(v, C, self.D) / V2
            shell["v_l2"][j] = kernels.weighted_norm2(c, w["lo2"]) / V2
        if self.keep_modes:
            out[L.mode_slice] = c.real**2 + c.imag**2
        return out


class DiagnosticTrace:
    """Batch-means accumulator for all observables of one or more trajectories."""

    def __init__(self, diag: ShellDiagnostics, t_start: float, t_end: float,
                 n_batches: int = 50, tag: str = "0"):
        self.diag = diag
        self.acc = BatchMeans(t_start, t_end, n_batches, tag)

    @classmethod
    def from_batches(cls, diag: ShellDiagnostics, t_start: float, t_end: float, batches,
                     tag: str = "0") -> "DiagnosticTrace":
        out = cls.__new__(cls)
        out.diag = diag
        out.acc = BatchMeans.from_batch_means(t_start, t_end, batches, tag)
        return out

    def add(self, coeff: np.ndarray, t: float, mid: np.ndarray | None = None):
        self.acc.accumulate(self.diag.sample(coeff, mid), t)

    def merge(self, other: "DiagnosticTrace") -> "DiagnosticTrace":
        out = DiagnosticTrace.__new__(DiagnosticTrace)
        out.diag = self.diag
        out.acc = self.acc.merge(other.acc)
        return out

    @property
    def batches(self) -> np.ndarray:
        return self.acc.batch_means()

    def scalar(self, name: str) -> np.ndarray:
        return self.batches[:, self.diag.layout.index[name]]

    def shell(self, name: str) -> np.ndarray:
        return self.batches[:, self.diag.layout.shell_slice[name]]

    def modes(self) -> np.ndarray:
        return self.batches[:, self.diag.layout.mode_slice]

    def estimate(self, series: np.ndarray) -> StationaryEstimate:
        return StationaryEstimate.from_batches(series, self.acc.batch_len)


# ---------------------------------------------------------------------------
# stationary balances


@dataclass
class BalanceRow:
    identity: str
    N: float | None
    terms: dict              # name -> StationaryEstimate (signed contributions)
    residual: StationaryEstimate
    injection: float         # scale used for the relative test
    rel_tol: float = 0.05

    @property
    def relative(self) -> float:
        if self.injection > 0:
            return abs(self.residual.mean) / self.injection
        # every term vanishes identically (e.g. a shell below all excited modes)
        return 0.0 if self.residual.mean == 0 else float("inf")

    @property
    def within_stderr(self) -> bool:
        if self.injection == 0 and self.residual.mean == 0:
            return True
        return bool(self.residual.within(0.0, 3.0))

    @property
    def within_relative(self) -> bool:
        return self.relative <= self.rel_tol

    @property
    def passed(self) -> bool:
        return self.within_stderr and self.within_relative


@dataclass
class BalanceReport:
    rows: list
    wa_residual: float
    h_residual: float
    ke_dissipation_ratio: StationaryEstimate

    def row(self, identity: str, N: float | None = None) -> BalanceRow:
        for r in self.rows:
            if r.identity == identity and (N is None or r.N == N):
                return r
        raise KeyError((identity, N))

    @property
    def wa_flux_residuals(self) -> dict:
        return {r.N: r.residual for r in self.rows if r.identity == "WAFB"}

    @property
    def h_flux_residuals(self) -> dict:
        return {r.N: r.residual for r in self.rows if r.identity == "HFluxBal"}

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _row(trace: DiagnosticTrace, identity: str, N, parts: dict, injection_parts: list[str],
         rel_tol: float) -> BalanceRow:
    """parts: name -> batch series of signed contributions (sum must vanish)."""
    terms = {k: trace.estimate(v) for k, v in parts.items()}
    resid = trace.estimate(sum(parts.values()))
    inj = abs(sum(terms[k].mean for k in injection_parts))
    if not inj > 0:
        # the forcing does not reach this shell: measure against the largest term
        inj = max(abs(t.mean) for t in terms.values())
    return BalanceRow(identity, N, terms, resid, inj, rel_tol)


def stationary_flux_balance(trace: DiagnosticTrace, params: SimParams,
                            shells=None, rel_tol: float = 0.05,
                            ito_coefficient: float = 1.0) -> BalanceReport:
    """Residuals of the stationary wave-action and Hamiltonian balance laws.

    Each row is a sum of signed batch-mean series that vanishes in
    expectation; the residual's standard error comes from its own batches,
    so correlations between terms are accounted for.
    """
    diag = trace.diag
    ens = diag.ens
    nu, s = params.nu, params.sigma
    nb = trace.batches.shape[0]
    const = lambda x: np.full(nb, float(x))  # noqa: E731
    rows = []

    rows.append(_row(trace, "WABal", None, {
        "nu_wa_dissipation": nu * trace.scalar("wa_diss"),
        "-sigma2_eps_wa": const(-s**2 * diag.inj_wa_total),
    }, ["-sigma2_eps_wa"], rel_tol))
    rows.append(_row(trace, "Hbal", None, {
        "nu_ke_dissipation": nu * trace.scalar("ke_diss"),
        "nu_sigma_pe_direct": nu * s * trace.scalar("pe_direct"),
        "-sigma2_eps_ke": const(-s**2 * diag.inj_ke_total),
        "-ito": -ito_coefficient * s**3 * trace.scalar("ito"),
    }, ["-sigma2_eps_ke", "-ito"], rel_tol))

    index = {N: j for j, N in enumerate(diag.shells)}
    wanted = diag.shells if shells is None else [float(N) for N in shells]
    pi_wa, pi_ke, pi_h = trace.shell("pi_wa"), trace.shell("pi_ke"), trace.shell("pi_h")
    wa_high, ke_low = trace.shell("wa_high"), trace.shell("ke_low")
    pe_v, v_l2 = trace.shell("pe_direct_v"), trace.shell("v_l2")
    for N in wanted:
        if N not in index:
            raise ConfigurationError(f"shell N={N} is not on the diagnostic ladder")
        j = index[N]
        rows.append(_row(trace, "WAFB", N, {
            "pi_wa/sigma": pi_wa[:, j] / s,
            "nu/sigma2_wa_high": nu / s**2 * wa_high[:, j],
            "-injection": const(-diag.inj_wafb[j]),
        }, ["-injection"], rel_tol))
        rows.append(_row(trace, "KEFB", N, {
            "pi_ke/sigma": pi_ke[:, j] / s,
            "nu/sigma2_ke_low": nu / s**2 * ke_low[:, j],
            "-injection": const(-diag.inj_ke[j]),
        }, ["-injection"], rel_tol))
        rows.append(_row(trace, "HFluxBal", N, {
            "pi_h/sigma": pi_h[:, j] / s,
            "nu/sigma2_ke_low": nu / s**2 * ke_low[:, j],
            "nu/sigma_pe_direct": nu / s * pe_v[:, j],
            "-injection": const(-diag.inj_ke[j]),
            "-ito": -ito_coefficient * s * diag.ito_factor[j] * v_l2[:, j],
        }, ["-injection", "-ito"], rel_tol))

    wa = rows[0]
    h = rows[1]
    ke_ratio = trace.estimate(nu / s**2 * trace.scalar("ke_diss") / ens.eps_ke)
    return BalanceReport(rows, wa.residual.mean / (s**2 * ens.eps_wa),
                         h.residual.mean / (s**2 * ens.eps_ke), ke_ratio)


# ---------------------------------------------------------------------------
# flux curves, indicators


@dataclass
class FluxCurve:
    shells: tuple
    pi_wa: list
    pi_ke: list
    pi_h: list


def flux_curve(trace: DiagnosticTrace, sigma: float) -> FluxCurve:
    """Per-shell (1/sigma) E[Pi] estimates."""
    out = {}
    for name in ("pi_wa", "pi_ke", "pi_h"):
        b = trace.shell(name) / sigma
        out[name] = [trace.estimate(b[:, j]) for j in range(b.shape[1])]
    return FluxCurve(trace.diag.shells, out["pi_wa"], out["pi_ke"], out["pi_h"])


@dataclass
class CascadeIndicators:
    shells: tuple
    weak_nl: dict                       # l2van, l4van, pekiller
    low_dissipation_fraction: list
    high_dissipation_fraction: list
    eps_star_wa: list
    eps_star_ke: list
    eps_H: StationaryEstimate
    eps_H_half: StationaryEstimate      # with the Ito term halved


def cascade_indicators(trace: DiagnosticTrace, params: SimParams) -> CascadeIndicators:
    ens = trace.diag.ens
    nu, s = params.nu, params.sigma
    est = trace.estimate
    weak = {
        "l2van": est(s * trace.scalar("l4_sq")),
        "l4van": est(nu / s * trace.scalar("l4_4")),
        "pekiller": est(nu / s * trace.scalar("pekiller")),
    }
    wa_low = nu / s**2 * trace.shell("wa_low")
    ke_high = nu / s**2 * trace.shell("ke_high")
    n = wa_low.shape[1]
    return CascadeIndicators(
        shells=trace.diag.shells,
        weak_nl=weak,
        low_dissipation_fraction=[est(wa_low[:, j] / ens.eps_wa) for j in range(n)],
        high_dissipation_fraction=[est(ke_high[:, j] / ens.eps_ke) for j in range(n)],
        eps_star_wa=[est(wa_low[:, j]) for j in range(n)],
        eps_star_ke=[est(ke_high[:, j]) for j in range(n)],
        eps_H=est(ens.eps_ke + s * trace.scalar("ito")),
        eps_H_half=est(ens.eps_ke + 0.5 * s * trace.scalar("ito")),
    )


def linear_indicator_oracle(ens: ForcingEnsemble, params: SimParams, shells) -> dict:
    """Closed-form low/high dissipation fractions of the linear (OU) regime."""
    from .integrator import exact_linear_spectrum

    g = ens.grid
    lin = exact_linear_spectrum(ens, params.nu, params.sigma)
    var = lin.as_array()
    D = dissipation_symbol(g)
    filt = default_filter(g)
    low, high = [], []
    for N in shells:
        lo = filt.low(N) * g.band
        hi = g.band * (1 - lo)
        low.append(params.nu / params.sigma**2 * np.sum(lo**2 * D * var) / g.volume**2 / ens.eps_wa)
        high.append(params.nu / params.sigma**2 * np.sum(hi**2 * g.ksq * D * var) / g.volume**2 / ens.eps_ke)
    return {"low_dissipation_fraction": np.array(low), "high_dissipation_fraction": np.array(high)}


# ---------------------------------------------------------------------------
# spectra


@dataclass
class ShellSpectrum:
    k_shell: np.ndarray
    E_density: np.ndarray
    err: np.ndarray
    n_modes: np.ndarray
    E_linear_exact: np.ndarray | None = None
    per_mode: StationaryEstimate | None = field(default=None, repr=False)


def _shell_index(grid: TorusGrid) -> np.ndarray:
    """Integer radial shell of each lattice mode (band only; -1 outside)."""
    r = np.sqrt(np.sum(grid.index.astype(float) ** 2, axis=0))
    j = np.rint(r).astype(np.int64)
    return np.where(grid.band, j, -1)


def shell_sum(grid: TorusGrid, per_mode: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shell-summed |u_hat|^2 / V^2 per unit k; per_mode may carry a leading batch axis."""
    j = _shell_index(grid).ravel()
    keep = j >= 0
    nsh = int(j[keep].max()) + 1
    pm = np.asarray(per_mode).reshape(-1, grid.m**grid.d)
    out = np.zeros((pm.shape[0], nsh))
    for b in range(pm.shape[0]):
        out[b] = np.bincount(j[keep], weights=pm[b, keep], minlength=nsh)
    counts = np.bincount(j[keep], minlength=nsh)
    k_shell = np.arange(nsh) / grid.lam
    return k_shell, out * grid.lam / grid.volume**2, counts


def power_spectrum(trace: DiagnosticTrace, params: SimParams | None = None,
                   linear_exact: bool = True) -> ShellSpectrum:
    """Shell spectrum E(k) = lam * sum_{shell} E|u_hat(k)|^2 / V^2 with batch errors."""
    g = trace.diag.grid
    if not trace.diag.keep_modes:
        raise ConfigurationError("trace was recorded without per-mode data")
    modes = trace.modes()
    k_shell, E_b, counts = shell_sum(g, modes)
    est = trace.estimate(E_b)
    exact = None
    if linear_exact and params is not None:
        from .integrator import exact_linear_spectrum

        lin = exact_linear_spectrum(trace.diag.ens, params.nu, params.sigma)
        exact = shell_sum(g, lin.as_array())[1][0]
    return ShellSpectrum(k_shell, np.asarray(est.mean), np.asarray(est.stderr), counts, exact,
                         trace.estimate(modes))


@dataclass
class SlopeFit:
    k_min: float
    k_max: float
    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    n_points: int


def fit_slope(k: np.ndarray, E: np.ndarray, k_range: tuple[float, float],
              confidence: float = 0.95) -> SlopeFit:
    """Least-squares slope of log E against log k over k_range (inclusive)."""
    k = np.asarray(k, float)
    E = np.asarray(E, float)
    sel = (k >= k_range[0]) & (k <= k_range[1]) & (k > 0) & (E > 0)
    n = int(sel.sum())
    if n < 3:
        raise ConfigurationError(f"slope range {k_range} holds {n} usable shells, need >= 3")
    res = sstats.linregress(np.log(k[sel]), np.log(E[sel]))
    half = sstats.t.ppf(0.5 + confidence / 2, n - 2) * res.stderr
    return SlopeFit(float(k_range[0]), float(k_range[1]), float(res.slope),
                    float(res.slope - half), float(res.slope + half), float(res.intercept), n)


# ---------------------------------------------------------------------------
# CSV output (fixed formatting so reruns are byte-identical)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) if not isinstance(x, str) else x for x in r])


def write_flux_curve(path, fc: FluxCurve):
    _write(path, ["N", "pi_wa", "pi_wa_err", "pi_ke", "pi_ke_err", "pi_h", "pi_h_err"],
           [(N, a.mean, a.stderr, b.mean, b.stderr, c.mean, c.stderr)
            for N, a, b, c in zip(fc.shells, fc.pi_wa, fc.pi_ke, fc.pi_h)])


def write_balance(path, rep: BalanceReport):
    rows = []
    for r in rep.rows:
        for name, e in r.terms.items():
            rows.append((r.identity, r.N, name, e.mean, e.stderr, ""))
        rows.append((r.identity, r.N, "residual", r.residual.mean, r.residual.stderr,
                     r.within_stderr))
        rel_err = r.residual.stderr / r.injection if r.injection > 0 else 0.0
        rows.append((r.identity, r.N, "relative_residual", r.relative, rel_err, r.within_relative))
    wa = rep.row("WABal")
    rows.append(("WABal", None, "wa_residual", rep.wa_residual, wa.residual.stderr / wa.injection,
                 wa.within_stderr))
    rows.append(("KEbalance", None, "ke_dissipation_ratio", rep.ke_dissipation_ratio.mean,
                 rep.ke_dissipation_ratio.stderr, ""))
    _write(path, ["identity", "N", "term", "value", "err", "pass"], rows)


def write_spectrum(path, sp: ShellSpectrum):
    exact = sp.E_linear_exact if sp.E_linear_exact is not None else [None] * len(sp.k_shell)
    _write(path, ["k_shell", "E_density", "err", "n_modes", "E_linear_exact"],
           zip(sp.k_shell, sp.E_density, sp.err, sp.n_modes, exact))


def write_indicators(path, ci: CascadeIndicators):
    rows = []
    for name, e in ci.weak_nl.items():
        rows.append((name, None, e.mean, e.stderr))
    for name in ("low_dissipation_fraction", "high_dissipation_fraction", "eps_star_wa", "eps_star_ke"):
        for N, e in zip(ci.shells, getattr(ci, name)):
            rows.append((name, N, e.mean, e.stderr))
    rows.append(("eps_H", None, ci.eps_H.mean, ci.eps_H.stderr))
    rows.append(("eps_H_half_ito", None, ci.eps_H_half.mean, ci.eps_H_half.stderr))
    _write(path, ["indicator", "N", "value", "err"], rows)


def write_slopes(path, fits: list):
    rows = []
    for f in fits:
        for ref in KZ_REFERENCES:
            rows.append((f.k_min, f.k_max, f.slope, f.ci_low, f.ci_high, f.n_points, ref))
    _write(path, ["k_min", "k_max", "slope", "ci_low", "ci_high", "n_points", "kz_reference"], rows)
