"""NLS state functionals, forcing ensembles and the dealiased cubic term.

The model is

    du = (-i Lap u + i sigma |u|^2 u - nu D u) dt - sigma sum_j g_j dW_j,
    D  = 1 - Lap,

with real, independent Wiener processes W_j.  Every forcing profile is a
single lattice mode a e^{ik.x}; profiles come in pairs (a e^{ik.x},
i a e^{ik.x}) so the forcing is statistically phase invariant.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .spectral import (LPFilter, SpectralField, TorusGrid, default_filter, norm_sq,
                       padded)


class ConfigurationError(ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""


@dataclass(frozen=True)
class SimParams:
    nu: float
    sigma: float
    lam: float = 1.0
    dt: float = 0.01
    t_burn: float = 200.0
    t_avg: float = 5000.0
    seed: int = 7
    d: int = 2
    m: int = 64

    def __post_init__(self):
        for name in ("nu", "sigma", "dt", "t_avg", "lam"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.t_burn < 0:
            raise ConfigurationError(f"t_burn must be nonnegative, got {self.t_burn}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must fit in 64 bits")

    @property
    def drive_ratio(self) -> float:
        """nu / sigma^2, the driving-strength parameter."""
        return self.nu / self.sigma**2

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.d, self.lam, self.m)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["nu_over_sigma2"] = self.drive_ratio
        return out


def dissipation_symbol(grid: TorusGrid) -> np.ndarray:
    """D(k) = 1 + |k|^2."""
    return 1.0 + grid.ksq


@dataclass(frozen=True, eq=False)
class ForcingEnsemble:
    """Single-mode forcing profiles g_j = amplitudes[j] * exp(i k_j . x).

    ``modes`` holds integer lattice indices n_j (k_j = n_j / lam).
    """

    grid: TorusGrid
    modes: np.ndarray
    amplitudes: np.ndarray
    annulus: tuple[float, float]
    eps_wa: float = field(init=False)
    eps_ke: float = field(init=False)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, self.grid.d)
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if len(modes) != len(amps):
            raise ConfigurationError("modes and amplitudes differ in length")
        if np.any(np.all(modes == 0, axis=1)):
            raise ConfigurationError("forcing profiles must be mean-zero")
        if np.any(np.abs(modes) >= self.grid.m // 2):
            raise ConfigurationError("forcing mode outside the retained band")
        modes.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", amps)
        a2 = np.abs(amps) ** 2
        object.__setattr__(self, "eps_wa", 0.5 * float(np.sum(a2)))
        object.__setattr__(self, "eps_ke", 0.5 * float(np.sum(self.k_abs**2 * a2)))

    def __len__(self):
        return len(self.amplitudes)

    @property
    def kvec(self) -> np.ndarray:
        return self.modes / self.grid.lam

    @property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.kvec**2, axis=1))

    def profile(self, j: int) -> SpectralField:
        coeff = np.zeros(self.grid.shape, dtype=np.complex128)
        coeff.flat[self.grid.flat_index(self.modes[j])] = self.amplitudes[j] * self.grid.volume
        return SpectralField(self.grid, coeff)

    @property
    def profiles(self) -> list[SpectralField]:
        return [self.profile(j) for j in range(len(self))]

    def forced_modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat positions of forced lattice modes and sum_j |g_hat_j(k)|^2 there."""
        flat = np.array([self.grid.flat_index(n) for n in self.modes], dtype=np.intp)
        w = (np.abs(self.amplitudes) * self.grid.volume) ** 2
        pos, inv = np.unique(flat, return_inverse=True)
        weight = np.zeros(len(pos))
        np.add.at(weight, inv, w)
        return pos, weight

    def is_phase_complete(self) -> bool:
        """True when every mode's profiles pair up as (g, i g)."""
        by_mode: dict[tuple, list] = {}
        for n, a in zip(map(tuple, self.modes), self.amplitudes):
            by_mode.setdefault(n, []).append(a)
        for amps in by_mode.values():
            s = sum(a * a for a in amps)  # vanishes iff the real/imag covariances balance
            if abs(s) > 1e-12 * sum(abs(a) ** 2 for a in amps):
                return False
        return True

    def abs_sq_sum(self) -> float:
        """sum_j |g_j(x)|^2, constant in x for single-mode profiles."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def to_manifest(self) -> dict:
        return {
            "d": self.grid.d,
            "lam": self.grid.lam,
            "m": self.grid.m,
            "annulus": list(self.annulus),
            "modes": self.modes.tolist(),
            "amplitudes_re": [float(a.real) for a in self.amplitudes],
            "amplitudes_im": [float(a.imag) for a in self.amplitudes],
            "eps_wa": self.eps_wa,
            "eps_ke": self.eps_ke,
        }

    @classmethod
    def from_manifest(cls, data: dict) -> "ForcingEnsemble":
        grid = TorusGrid(int(data["d"]), float(data["lam"]), int(data["m"]))
        amps = np.array(data["amplitudes_re"]) + 1j * np.array(data["amplitudes_im"])
        return cls(grid, np.array(data["modes"]), amps, tuple(data["annulus"]))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def build_forcing(grid: TorusGrid, annulus: tuple[float, float] = (0.5, 2.0),
                  count: int | None = None, eps_wa_target: float = 1.0,
                  rng: np.random.Generator | None = None) -> ForcingEnsemble:
    """Uniform-amplitude single-mode forcing on the lattice annulus.

    Every lattice mode with k_lo <= |k| <= k_hi is a candidate; with
    ``count=None`` all of them are forced.  Otherwise ``count // 2`` modes
    are drawn with ``rng`` (an odd count is rounded up).  Each chosen mode
    contributes the pair a e^{ik.x}, i a e^{ik.x}, and a is fixed so that
    eps_wa equals ``eps_wa_target``.
    """
    k_lo, k_hi = annulus
    if not (0 < k_lo < 1 < k_hi):
        raise ConfigurationError(f"annulus must satisfy 0 < k_lo < 1 < k_hi, got {annulus}")
    if not eps_wa_target > 0:
        raise ConfigurationError("eps_wa_target must be positive")
    tol = 1e-12
    sel = grid.band & (grid.kabs >= k_lo - tol) & (grid.kabs <= k_hi + tol)
    cand = grid.index.reshape(grid.d, -1)[:, np.flatnonzero(sel.ravel())].T
    if len(cand) == 0:
        raise ConfigurationError(f"annulus {annulus} contains no lattice modes at lam={grid.lam}")
    cand = cand[np.lexsort(cand.T[::-1])]
    if count is None:
        chosen = cand
    else:
        if count < 2:
            raise ConfigurationError("count must be >= 2")
        n_modes = (count + 1) // 2
        if n_modes > len(cand):
            raise ConfigurationError(
                f"count {count} needs {n_modes} modes but the annulus holds {len(cand)}")
        rng = rng if rng is not None else np.random.default_rng(0)
        pick = np.sort(rng.choice(len(cand), size=n_modes, replace=False))
        chosen = cand[pick]
    n_prof = 2 * len(chosen)
    a = math.sqrt(2.0 * eps_wa_target / n_prof)
    modes = np.repeat(chosen, 2, axis=0)
    amps = np.tile(np.array([a, 1j * a]), len(chosen))
    return ForcingEnsemble(grid, modes, amps, (float(k_lo), float(k_hi)))


@dataclass
class ForcingReport:
    l4_plus_laplacian: float
    low_mass: dict
    high_grad_mass: dict
    mean_zero: bool
    in_annulus: bool
    phase_complete: bool

    @property
    def passed(self) -> bool:
        return (self.mean_zero and self.in_annulus and self.phase_complete
                and all(v == 0.0 for v in self.low_mass.values())
                and all(v == 0.0 for v in self.high_grad_mass.values()))


def validate_forcing(ens: ForcingEnsemble, filt: LPFilter | None = None,
                     n_scales: int = 3) -> ForcingReport:
    """Frequency-localisation checks on a forcing ensemble.

    Reports sum_j (|g_j|_{L4}^2 + |Lap g_j|_{L2}^2), the low-frequency mass
    sum_j |P_{<=N} g_j|^2 at dyadic N <= k_lo/2 and the high-frequency
    gradient mass sum_j |grad P_{>=N} g_j|^2 at dyadic N >= 2 k_hi.  For
    annulus-supported forcing the last two are exactly zero.
    """
    filt = filt or default_filter(ens.grid)
    k_lo, k_hi = ens.annulus
    a2 = np.abs(ens.amplitudes) ** 2
    kk = ens.k_abs
    # single-mode profiles: |g|_{L4} = |a|, |Lap g|_{L2} = |k|^2 |a|
    l4_lap = float(np.sum(a2 + kk**4 * a2))
    j_lo = math.floor(math.log2(k_lo / 2.0))
    j_hi = math.ceil(math.log2(2.0 * k_hi))
    fn = filt.low
    low_mass, high_mass = {}, {}
    flat = [ens.grid.flat_index(n) for n in ens.modes]
    for j in range(j_lo - n_scales + 1, j_lo + 1):
        N = 2.0**j
        mult = fn(N).ravel()[flat]
        low_mass[N] = float(np.sum(mult**2 * a2))
    for j in range(j_hi, j_hi + n_scales):
        N = 2.0**j
        mult = 1.0 - fn(N).ravel()[flat]
        high_mass[N] = float(np.sum(mult**2 * kk**2 * a2))
    return ForcingReport(
        l4_plus_laplacian=l4_lap,
        low_mass=low_mass,
        high_grad_mass=high_mass,
        mean_zero=bool(np.all(np.any(ens.modes != 0, axis=1))),
        in_annulus=bool(np.all((kk >= k_lo - 1e-12) & (kk <= k_hi + 1e-12))),
        phase_complete=ens.is_phase_complete(),
    )


def wave_action(u: SpectralField) -> float:
    return 0.5 * norm_sq(u.coeff, u.grid)


class Hamiltonian(NamedTuple):
    total: float
    kinetic: float
    potential: float


def hamiltonian(u: SpectralField, sigma: float, padding: int = 2) -> Hamiltonian:
    """H = 1/2 |grad u|^2 + sigma/4 |u|_{L4}^4 (volume averaged)."""
    kin = 0.5 * norm_sq(u.coeff, u.grid, u.grid.ksq)
    pot = 0.25 * sigma * padded(u.grid, padding).mean_abs_pow(u.coeff, 4)
    return Hamiltonian(kin + pot, kin, pot)


def cubic_nonlinearity(u: SpectralField, padding: int = 2) -> SpectralField:
    """Retained-band coefficients of |u|^2 u via zero-padded collocation."""
    return SpectralField(u.grid, padded(u.grid, padding).cubic(u.coeff))


@dataclass
class DissipationRecord:
    """Instantaneous terms of the wave-action and Hamiltonian balances."""

    wa_dissipation: float          # nu |D^{1/2} u|^2
    ke_dissipation: float          # nu |grad D^{1/2} u|^2
    pe_l4: float                   # nu sigma |u|_{L4}^4
    pe_grad_factor3: float         # 3 nu sigma |u grad u|^2
    pe_direct: float               # nu sigma Re mean(D conj(u) |u|^2 u)
    pe_decomposed: float           # nu sigma (|u|^4 + 2|u grad u|^2 + Re mean(u^2 (grad conj u)^2))
    pe_factor3_defect: float       # (|u|^4 + 3|u grad u|^2) - Re mean(D conj(u)|u|^2 u), times nu sigma
    ito: float                     # sigma^3 sum_j mean(|u|^2 |g_j|^2)
    ito_half: float                # sigma^3 / 2 sum_j mean(|u|^2 |g_j|^2)
    l2van: float                   # sigma |u|_{L4}^2
    l4van: float                   # (nu / sigma) |u|_{L4}^4
    pekiller: float                # (nu / sigma) |u|_{L4}^2 |grad u|_{L4}^2


def potential_terms(u: SpectralField, padding: int = 2) -> dict:
    """Quartic integrals of u and grad u by exact quadrature on the padded grid."""
    pt = padded(u.grid, padding)
    z = pt.to_physical(u.coeff)
    a2 = z.real**2 + z.imag**2
    grads = [pt.to_physical(1j * u.grid.k[i] * u.coeff) for i in range(u.grid.d)]
    g2 = sum(gz.real**2 + gz.imag**2 for gz in grads)
    cross = sum(np.conj(gz) ** 2 for gz in grads) * z * z
    return {
        "l2": float(a2.mean()),
        "l4_4": float(np.mean(a2 * a2)),
        "u_gradu_2": float(np.mean(a2 * g2)),
        "cross": float(np.mean(cross.real)),
        "gradu_l4_4": float(np.mean(g2 * g2)),
    }


def dissipation_functionals(u: SpectralField, ens: ForcingEnsemble, nu: float, sigma: float,
                            padding: int = 2) -> DissipationRecord:
    g = u.grid
    D = dissipation_symbol(g)
    q = potential_terms(u, padding)
    F = padded(g, padding).cubic(u.coeff)
    direct = float(np.real(np.vdot(D * u.coeff, F))) / g.volume**2
    decomposed = q["l4_4"] + 2.0 * q["u_gradu_2"] + q["cross"]
    ito_base = q["l2"] * ens.abs_sq_sum()
    return DissipationRecord(
        wa_dissipation=nu * norm_sq(u.coeff, g, D),
        ke_dissipation=nu * norm_sq(u.coeff, g, g.ksq * D),
        pe_l4=nu * sigma * q["l4_4"],
        pe_grad_factor3=3.0 * nu * sigma * q["u_gradu_2"],
        pe_direct=nu * sigma * direct,
        pe_decomposed=nu * sigma * decomposed,
        pe_factor3_defect=nu * sigma * (q["l4_4"] + 3.0 * q["u_gradu_2"] - direct),
        ito=sigma**3 * ito_base,
        ito_half=0.5 * sigma**3 * ito_base,
        l2van=sigma * math.sqrt(q["l4_4"]),
        l4van=nu / sigma * q["l4_4"],
        pekiller=nu / sigma * math.sqrt(q["l4_4"]) * math.sqrt(q["gradu_l4_4"]),
    )
