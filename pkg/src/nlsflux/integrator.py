"""Time stepping for the damped, driven NLS in Fourier space.

The linear part (dispersion, damping and additive noise) is an
Ornstein-Uhlenbeck process per Fourier mode and is advanced exactly.  The
cubic term is advanced either by an explicit exponential-Euler step or,
by default, by an implicit-midpoint substep inside a Strang splitting.
The midpoint substep is Galerkin-projected onto the retained band and
conserves the wave action exactly, which keeps the stationary balance
laws free of first-order time-step bias.
"""

from __future__ import annotations

import base64
import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ForcingEnsemble, SimParams, dissipation_symbol
from .spectral import SpectralField, TorusGrid, padded


class StabilityError(RuntimeError):
    """Nonlinear substep failed to converge or the stability guard tripped in strict mode."""


class StabilityWarning(UserWarning):
    pass


SCHEMES = ("strang", "expeuler")


@dataclass
class TrajectoryState:
    u: SpectralField
    t: float
    rng: np.random.Generator
    params: SimParams
    steps: int = 0

    @classmethod
    def initial(cls, params: SimParams, u0: SpectralField | None = None) -> "TrajectoryState":
        grid = params.grid
        u = u0.copy() if u0 is not None else SpectralField(grid, np.zeros(grid.shape, complex))
        return cls(u=u, t=0.0, rng=np.random.default_rng(int(params.seed)), params=params)

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state


def params_hash(params: SimParams) -> str:
    return hashlib.sha256(json.dumps(params.to_dict(), sort_keys=True).encode()).hexdigest()


class Stepper:
    """Precomputed propagators for one (params, forcing) pair.

    ``nonlinear=False`` drops the cubic term (the linear OU regime).
    ``strict=True`` turns the stability guard sigma * max|u|^2 * dt > 1 into
    a :class:`StabilityError`.
    """

    def __init__(self, params: SimParams, ens: ForcingEnsemble, scheme: str = "strang",
                 nonlinear: bool = True, strict: bool = False, padding: int = 2,
                 tol: float = 1e-10, max_iter: int = 60):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        grid = params.grid
        if ens.grid != grid:
            raise ValueError("forcing ensemble grid does not match params")
        self.params, self.ens, self.grid = params, ens, grid
        self.scheme, self.nonlinear, self.strict = scheme, nonlinear, strict
        self.tol, self.max_iter = tol, max_iter
        self.pt = padded(grid, padding)
        self.band = grid.band
        nu, sigma, dt = params.nu, params.sigma, params.dt
        D = dissipation_symbol(grid)
        gen = 1j * grid.ksq - nu * D
        self.prop_full = np.exp(gen * dt) * self.band
        self.prop_half = np.exp(gen * (0.5 * dt)) * self.band
        self.disp = 1j * grid.ksq  # conservative generator, damping off
        self.forced_pos, weight = ens.forced_modes()
        self.G2 = sigma**2 * weight
        self.rate = nu * D.ravel()[self.forced_pos]
        self.std_full = self._component_std(dt)
        self.std_half = self._component_std(0.5 * dt)
        self.last_rate = 0.0

    def _component_std(self, h: float) -> np.ndarray:
        # variance of the stochastic convolution over h, split evenly between Re and Im
        var = self.G2 * -np.expm1(-2.0 * self.rate * h) / (2.0 * self.rate)
        return np.sqrt(0.5 * var)

    def _add_noise(self, coeff: np.ndarray, rng: np.random.Generator, std: np.ndarray):
        xi = rng.standard_normal((2, len(std)))
        coeff.ravel()[self.forced_pos] += std * (xi[0] + 1j * xi[1])

    def _guard(self, amax: float, h: float):
        self.last_rate = self.params.sigma * amax * abs(h)
        if self.last_rate > 1.0:
            msg = f"sigma*max|u|^2*dt = {self.last_rate:.3g} > 1"
            if self.strict:
                raise StabilityError(msg)
            warnings.warn(msg, StabilityWarning, stacklevel=3)

    def nonlinear_flow(self, coeff: np.ndarray, h: float, tol: float | None = None) -> np.ndarray:
        """Implicit-midpoint step of du/dt = i sigma P(|u|^2 u) over time h.

        Solves w = v + (i sigma h / 2) P(|w|^2 w) by fixed-point iteration and
        returns 2w - v.
        """
        tol = self.tol if tol is None else tol
        pt = self.pt
        c = 0.5j * self.params.sigma * h
        v = coeff.ravel()
        w = coeff.copy()
        wf = w.ravel()
        new = np.empty_like(w)
        nf = new.ravel()
        scale = max(float(np.vdot(v, v).real), 1e-300)
        prev = np.inf
        for it in range(self.max_iter):
            z = pt.to_physical(w)
            zf = z.ravel()
            if it == 0:
                self._guard(float(np.max(zf.real**2 + zf.imag**2)), h)
            kernels.cubic(zf, zf)
            F = pt.to_spectral(z, overwrite=True)
            kernels.axpy(c, F.ravel(), v, nf)
            diff = nf - wf
            err = float(np.vdot(diff, diff).real)
            w, new = new, w
            wf, nf = w.ravel(), new.ravel()
            if err <= tol * tol * scale:
                break
            # round-off floor reached: further sweeps cannot shrink the update
            if err >= prev and err <= 1e-24 * scale:
                break
            prev = err
        else:
            raise StabilityError(f"midpoint iteration did not converge in {self.max_iter} steps")
        # the state at which the cubic term acted, kept for flux sampling
        self.midpoint = w
        return 2.0 * w - coeff

    def stochastic(self, s: TrajectoryState) -> TrajectoryState:
        """One step of the driven, damped equation (mutates and returns ``s``)."""
        u = s.u.coeff
        dt = self.params.dt
        self.midpoint = None
        if self.scheme == "strang":
            u *= self.prop_half
            self._add_noise(u, s.rng, self.std_half)
            if self.nonlinear:
                u = self.nonlinear_flow(u, dt)
            u *= self.prop_half
            self._add_noise(u, s.rng, self.std_half)
        else:
            if self.nonlinear:
                z = self.pt.to_physical(u)
                self._guard(float(np.max(np.abs(z) ** 2)), dt)
                u = u + (1j * self.params.sigma * dt) * self.pt.cubic(u)
            u = u * self.prop_full
            self._add_noise(u, s.rng, self.std_full)
        s.u = SpectralField(self.grid, u)
        s.steps += 1
        s.t += dt
        return s

    def deterministic(self, s: TrajectoryState, dt: float | None = None,
                      tol: float = 1e-15) -> TrajectoryState:
        """Conservative step (nu = 0, no noise): Strang splitting of exact
        dispersion around the projected implicit-midpoint cubic substep.

        Both substeps are isometries of the retained-band L^2 norm.  A
        negative ``dt`` steps backward.
        """
        dt = self.params.dt if dt is None else dt
        half = np.exp(self.disp * (0.5 * dt)) * self.band
        u = s.u.coeff * half
        if self.nonlinear:
            u = self.nonlinear_flow(u, dt, tol=tol)
        u *= half
        s.u = SpectralField(self.grid, u)
        s.steps += 1
        s.t += dt
        return s


def step_stochastic(s: TrajectoryState, stepper: Stepper) -> TrajectoryState:
    return stepper.stochastic(s)


def step_deterministic(s: TrajectoryState, stepper: Stepper, dt: float | None = None) -> TrajectoryState:
    return stepper.deterministic(s, dt)


@dataclass
class LinearSpectrum:
    """Closed-form stationary second moments of the linearised equation."""

    grid: TorusGrid
    positions: np.ndarray      # flat indices of forced modes
    variance: np.ndarray       # E|u_hat(k)|^2 at those modes
    wa_dissipation: float      # nu E|D^{1/2} u|^2_{L2_lam}
    sigma2_eps_wa: float

    def as_array(self) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        out.ravel()[self.positions] = self.variance
        return out


def exact_linear_spectrum(ens: ForcingEnsemble, nu: float, sigma: float,
                          grid: TorusGrid | None = None) -> LinearSpectrum:
    """E|u_hat(k)|^2 = sigma^2 sum_j |g_hat_j(k)|^2 / (2 nu D(k))."""
    grid = grid or ens.grid
    pos, weight = ens.forced_modes()
    D = dissipation_symbol(grid).ravel()[pos]
    var = sigma**2 * weight / (2.0 * nu * D)
    wa = nu * float(np.sum(D * var)) / grid.volume**2
    return LinearSpectrum(grid, pos, var, wa, sigma**2 * ens.eps_wa)


def save_checkpoint(path, s: TrajectoryState):
    coeff = np.ascontiguousarray(s.u.coeff, dtype="<c16")
    data = {
        "t": s.t,
        "steps": s.steps,
        "shape": list(coeff.shape),
        "coeff_b64": base64.b64encode(coeff.tobytes()).decode("ascii"),
        "rng_state": s.rng.bit_generator.state,
        "params": s.params.to_dict(),
        "params_hash": params_hash(s.params),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True)


def load_checkpoint(path, params: SimParams | None = None) -> TrajectoryState:
    with open(path) as fh:
        data = json.load(fh)
    if params is None:
        p = dict(data["params"])
        p.pop("nu_over_sigma2", None)
        params = SimParams(**p)
    grid = params.grid
    coeff = np.frombuffer(base64.b64decode(data["coeff_b64"]), dtype="<c16")
    coeff = coeff.reshape(data["shape"]).astype(np.complex128)
    if coeff.shape != grid.shape:
        raise ValueError("checkpoint grid does not match params")
    rng = np.random.default_rng()
    rng.bit_generator.state = data["rng_state"]
    return TrajectoryState(SpectralField(grid, coeff), float(data["t"]), rng, params, int(data["steps"]))
