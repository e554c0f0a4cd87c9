"""Fourier conventions, volume-averaged norms and Littlewood-Paley projections.

Coefficients follow the unnormalised torus convention

    u_hat(k) = int_{T^d_lam} u(x) exp(-i k.x) dx,
    u(x)     = (2 pi lam)^{-d} sum_k u_hat(k) exp(i k.x),

with k in the lattice (Z / lam)^d.  Arrays are stored in numpy FFT order,
so the entry at integer index n corresponds to k = n / lam.  The Nyquist
plane (n_i = -m/2) is kept by the raw transforms but excluded from the
retained band used by the dynamics.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import kernels


class ShapeError(ValueError):
    """Array shape does not match the grid."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


def fft_workers() -> int:
    return max(1, int(os.environ.get("NLSFLUX_THREADS", "1")))


@dataclass(frozen=True)
class TorusGrid:
    """Collocation grid on the torus of side 2*pi*lam with m points per axis."""

    d: int
    lam: float
    m: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.m < 4 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of two >= 4, got {self.m}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.d

    @property
    def volume(self) -> float:
        return (2.0 * math.pi * self.lam) ** self.d

    @property
    def dx(self) -> float:
        return 2.0 * math.pi * self.lam / self.m

    @functools.cached_property
    def index(self) -> np.ndarray:
        """Integer lattice index n, shape (d, m, ..., m)."""
        n1 = np.fft.fftfreq(self.m, 1.0 / self.m).round().astype(np.int64)
        return np.stack(np.meshgrid(*([n1] * self.d), indexing="ij"))

    @functools.cached_property
    def k(self) -> np.ndarray:
        """Wavevectors k = n / lam, shape (d, m, ..., m)."""
        return self.index / self.lam

    @functools.cached_property
    def ksq(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @functools.cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.ksq)

    @functools.cached_property
    def band(self) -> np.ndarray:
        """Boolean mask of retained modes: every |n_i| < m/2."""
        return np.all(self.index > -self.m // 2, axis=0)

    @functools.cached_property
    def x(self) -> np.ndarray:
        """Collocation points, shape (d, m, ..., m)."""
        x1 = np.arange(self.m) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.d), indexing="ij"))

    def flat_index(self, n: Sequence[int]) -> int:
        """Flat position in an FFT-ordered array of the lattice index n."""
        return int(np.ravel_multi_index(tuple(int(v) % self.m for v in n), self.shape))

    def max_k(self) -> float:
        """Largest |k| in the retained band."""
        return float(self.kabs[self.band].max())


@dataclass
class SpectralField:
    grid: TorusGrid
    coeff: np.ndarray

    def __post_init__(self):
        self.coeff = np.asarray(self.coeff, dtype=np.complex128)
        if self.coeff.shape != self.grid.shape:
            raise ShapeError(f"coefficient shape {self.coeff.shape} != grid shape {self.grid.shape}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeff.copy())

    def __add__(self, other):
        return SpectralField(self.grid, self.coeff + other.coeff)

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeff - other.coeff)

    def __mul__(self, c):
        return SpectralField(self.grid, self.coeff * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeff)


@dataclass
class PhysicalField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise ShapeError(f"value shape {self.values.shape} != grid shape {self.grid.shape}")


def forward_transform(f: PhysicalField) -> SpectralField:
    g = f.grid
    coeff = sfft.fftn(f.values, workers=fft_workers()) * (g.dx**g.d)
    return SpectralField(g, coeff)


def inverse_transform(F: SpectralField) -> PhysicalField:
    g = F.grid
    values = sfft.ifftn(F.coeff, workers=fft_workers()) * (g.m**g.d / g.volume)
    return PhysicalField(g, values)


class PaddedTransform:
    """Maps retained-band coefficients to and from a zero-padded grid.

    With ``padding=2`` the padded grid has 2m points per axis, so pointwise
    products of up to four band-limited factors integrate exactly and the
    cubic term is alias-free after truncation.  ``padding=1`` collocates on
    the original grid (aliased).
    """

    def __init__(self, grid: TorusGrid, padding: int = 2):
        if padding not in (1, 2):
            raise ValueError(f"padding must be 1 or 2, got {padding}")
        self.grid = grid
        self.padding = padding
        self.M = padding * grid.m
        self.pshape = (self.M,) * grid.d
        band_pos = np.flatnonzero(grid.band.ravel())
        n = grid.index.reshape(grid.d, -1)[:, band_pos]
        self.src_idx = band_pos.astype(np.intp)
        self.dst_idx = np.ravel_multi_index(tuple(n % self.M), self.pshape).astype(np.intp)
        self.n_pad = self.M**grid.d
        # u(x) = (M^d / V) ifftn(pad(u_hat)),  u_hat = (V / M^d) fftn(u)
        self.to_phys_scale = self.n_pad / grid.volume
        self.to_spec_scale = grid.volume / self.n_pad
        self.workers = fft_workers()

    def to_physical(self, coeff: np.ndarray) -> np.ndarray:
        buf = np.empty(self.pshape, dtype=np.complex128)
        kernels.scatter(np.ascontiguousarray(coeff).ravel(), self.src_idx, self.dst_idx,
                        self.to_phys_scale, buf.ravel())
        return sfft.ifftn(buf, overwrite_x=True, workers=self.workers)

    def to_spectral(self, values: np.ndarray, overwrite: bool = False) -> np.ndarray:
        spec = sfft.fftn(values, overwrite_x=overwrite, workers=self.workers)
        out = np.empty(self.grid.shape, dtype=np.complex128)
        kernels.scatter(spec.ravel(), self.dst_idx, self.src_idx, self.to_spec_scale, out.ravel())
        return out

    def cubic(self, coeff: np.ndarray) -> np.ndarray:
        """Band coefficients of |u|^2 u."""
        z = self.to_physical(coeff)
        zf = z.ravel()
        kernels.cubic(zf, zf)
        return self.to_spectral(z, overwrite=True)

    def mean_abs_pow(self, coeff: np.ndarray, p: float) -> float:
        """Volume average of |u|^p by quadrature on the padded grid."""
        z = self.to_physical(coeff)
        a2 = z.real**2 + z.imag**2
        if p == 2:
            return float(a2.mean())
        if p == 4:
            return float(np.mean(a2 * a2))
        return float(np.mean(a2 ** (p / 2.0)))


@functools.lru_cache(maxsize=32)
def padded(grid: TorusGrid, padding: int = 2) -> PaddedTransform:
    return PaddedTransform(grid, padding)


def volume_lp_norm(f: PhysicalField | SpectralField, p: float) -> float:
    """Volume-averaged L^p norm (mean |f|^p)^(1/p)."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if isinstance(f, PhysicalField):
        a = np.abs(f.values)
        return float(np.mean(a**p) ** (1.0 / p))
    return padded(f.grid).mean_abs_pow(f.coeff, p) ** (1.0 / p)


def norm_sq(coeff: np.ndarray, grid: TorusGrid, weight: np.ndarray | None = None) -> float:
    """Volume-averaged sum_k w(k) |u_hat(k)|^2 / V^2 (Parseval)."""
    w = np.ones(grid.shape) if weight is None else weight
    return kernels.weighted_norm2(np.ascontiguousarray(coeff).ravel(),
                                  np.ascontiguousarray(w, dtype=np.float64).ravel()) / grid.volume**2


def inner(u: SpectralField, v: SpectralField) -> complex:
    """Volume-averaged pairing mean(conj(u) v)."""
    return complex(np.vdot(u.coeff, v.coeff)) / u.grid.volume**2


def psi(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 for r <= 1, 0 for r >= 2, C-infinity and monotone between."""
    r = np.asarray(r, dtype=np.float64)
    a = 2.0 - r
    b = r - 1.0
    with np.errstate(divide="ignore", over="ignore"):
        fa = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
        fb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return fa / (fa + fb)


def psi_sharp(r: np.ndarray) -> np.ndarray:
    return (np.asarray(r) <= 1.0).astype(np.float64)


@dataclass
class LPFilter:
    """Littlewood-Paley multipliers psi(k/N) on a grid, cached per scale N.

    ``cutoff="sharp"`` swaps psi for the indicator of |k| <= N.
    """

    grid: TorusGrid
    cutoff: str = "smooth"
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.cutoff not in ("smooth", "sharp"):
            raise ValueError(f"cutoff must be 'smooth' or 'sharp', got {self.cutoff!r}")

    def low(self, N: float) -> np.ndarray:
        N = float(N)
        if not N > 0:
            raise DomainError(f"scale N must be positive, got {N}")
        mult = self.cache.get(N)
        if mult is None:
            fn = psi if self.cutoff == "smooth" else psi_sharp
            mult = fn(self.grid.kabs / N)
            mult.setflags(write=False)
            self.cache[N] = mult
        return mult

    def high(self, N: float) -> np.ndarray:
        return 1.0 - self.low(N)

    def shell(self, N: float) -> np.ndarray:
        return self.low(2.0 * N) - self.low(N)

    def band(self, A: float, B: float) -> np.ndarray:
        return self.low(B) - self.low(A)


@functools.lru_cache(maxsize=32)
def default_filter(grid: TorusGrid, cutoff: str = "smooth") -> LPFilter:
    return LPFilter(grid, cutoff)


def shell_ladder(grid: TorusGrid, n_min: int = -6) -> list[float]:
    """Dyadic scales 2^n_min ... 2^ceil(log2(m / (2 lam)))."""
    top = math.ceil(math.log2(grid.m / (2.0 * grid.lam)))
    return [2.0**j for j in range(n_min, top + 1)]


def lp_project_low(u: SpectralField, N: float, filt: LPFilter | None = None) -> SpectralField:
    filt = filt or default_filter(u.grid)
    return SpectralField(u.grid, u.coeff * filt.low(N))


def lp_project_high(u: SpectralField, N: float, filt: LPFilter | None = None) -> SpectralField:
    filt = filt or default_filter(u.grid)
    return SpectralField(u.grid, u.coeff * filt.high(N))


def lp_shell(u: SpectralField, N: float, filt: LPFilter | None = None) -> SpectralField:
    filt = filt or default_filter(u.grid)
    return SpectralField(u.grid, u.coeff * filt.shell(N))


def lp_band(u: SpectralField, A: float, B: float, filt: LPFilter | None = None) -> SpectralField:
    filt = filt or default_filter(u.grid)
    return SpectralField(u.grid, u.coeff * filt.band(A, B))


def gradient(u: SpectralField) -> list[SpectralField]:
    return [SpectralField(u.grid, 1j * u.grid.k[i] * u.coeff) for i in range(u.grid.d)]


def _lp_norm_components(parts: list[SpectralField], p: float) -> float:
    """L^p norm of the pointwise Euclidean length of a list of fields."""
    pt = padded(parts[0].grid)
    a2 = 0.0
    for f in parts:
        z = pt.to_physical(f.coeff)
        a2 = a2 + z.real**2 + z.imag**2
    return float(np.mean(a2 ** (p / 2.0)) ** (1.0 / p))


def frac_derivative(u: SpectralField, s: float) -> SpectralField:
    """|grad|^s u; the zero mode is dropped when s < 0."""
    kabs = u.grid.kabs
    with np.errstate(divide="ignore"):
        mult = np.where(kabs > 0, kabs**s, 0.0)
    return SpectralField(u.grid, u.coeff * mult)


@dataclass
class BernsteinReport:
    N: float
    p: float
    q: float
    C: float
    ratios: dict

    @property
    def passed(self) -> bool:
        return all(not (r > self.C) for r in self.ratios.values())

    @property
    def worst(self) -> float:
        vals = [r for r in self.ratios.values() if np.isfinite(r)]
        return max(vals) if vals else float("nan")


def bernstein_suite(u: SpectralField, N: float, p: float, q: float, C: float = 10.0,
                    s_values: Sequence[float] = (-1.0, 1.0),
                    filt: LPFilter | None = None) -> BernsteinReport:
    """Evaluate both sides of the five Bernstein inequalities at scale N.

    Each entry of ``ratios`` is lhs / rhs (for the two-sided B4 the larger of
    the ratio and its reciprocal), so the inequalities hold with constant C
    iff every ratio is <= C.  Shell ratios are NaN when P_N u vanishes.
    """
    if not (1 <= p <= q):
        raise DomainError(f"need 1 <= p <= q, got p={p}, q={q}")
    filt = filt or default_filter(u.grid)
    g = u.grid
    nu_p = _lp_norm_components([u], p)
    low = lp_project_low(u, N, filt)
    sh = lp_shell(u, N, filt)
    sh_p = _lp_norm_components([sh], p)
    ratios = {
        "B1": _lp_norm_components([low], p) / nu_p,
        "B2": _lp_norm_components(gradient(low), p) / (N * nu_p),
        "B3": sh_p / nu_p,
    }
    empty = not sh_p > 1e-300
    for s in s_values:
        if empty:
            ratios[f"B4[s={s:g}]"] = float("nan")
            continue
        r = _lp_norm_components([frac_derivative(sh, s)], p) / (N**s * sh_p)
        ratios[f"B4[s={s:g}]"] = max(r, 1.0 / r)
    if empty:
        ratios["B5"] = float("nan")
    else:
        factor = (N / g.lam) ** (g.d * (1.0 / p - 1.0 / q))
        ratios["B5"] = _lp_norm_components([sh], q) / (factor * sh_p)
    return BernsteinReport(N=N, p=p, q=q, C=C, ratios=ratios)
