"""Run configuration: flat ``key = value`` text files with typed, validated fields."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

from .model import ConfigurationError, SimParams, dissipation_symbol  # noqa: F401

_SECTION = "run"


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(";", ",").split(","))


def _ranges(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        lo, hi = part.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    # model and numerics
    nu: float = 0.1
    sigma: float = 0.5
    lam: float = 1.0
    d: int = 2
    m: int = 64
    dt: float = 0.01
    t_burn: float | None = None       # None: 5 / (nu D(k_lo))
    t_avg: float = 5000.0
    seed: int = 7
    scheme: str = "strang"
    padding: int = 2
    nonlinear: bool = True
    relax: bool = False
    # forcing
    annulus_lo: float = 0.5
    annulus_hi: float = 2.0
    forcing_count: int | None = None  # None: every lattice mode in the annulus
    eps_wa: float = 1.0
    # diagnostics
    cutoff: str = "smooth"
    flux_form: str = "corrected"
    shell_min_exp: int = -6
    balance_shells: tuple = (0.5, 1.0, 2.0, 4.0)
    n_batches: int = 50
    sample_every: int | None = None   # None: ceil(0.1 / dt)
    slope_ranges: tuple = ()
    plots: bool = False
    # sweep
    sweep_nu: tuple = ()
    sweep_sigma: tuple = ()
    sweep_lam: tuple = ()
    sweep_mode: str = "zip"
    sweep_workers: int = 0            # 0: one per CPU
    n_low: float = 0.25
    n_high: float = 8.0
    # verification
    verify_tol: float = 1e-12
    out: str = "out"

    _PARSERS = {
        "t_burn": lambda s: None if s.strip().lower() in ("", "auto", "none") else float(s),
        "forcing_count": lambda s: None if s.strip().lower() in ("", "all", "none") else int(s),
        "sample_every": lambda s: None if s.strip().lower() in ("", "auto", "none") else int(s),
        "balance_shells": _floats,
        "sweep_nu": _floats,
        "sweep_sigma": _floats,
        "sweep_lam": _floats,
        "slope_ranges": _ranges,
    }

    def __post_init__(self):
        self.validate()

    # -- construction -----------------------------------------------------
    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, data: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Build from string or typed values; unknown keys are an error."""
        kw = dataclasses.asdict(base) if base is not None else {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, raw in data.items():
            key = key.strip().lower().replace("-", "_")
            if key not in types:
                raise ConfigurationError(f"unknown config key {key!r}")
            kw[key] = cls._coerce(key, raw, types[key])
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def _coerce(cls, key, raw, typ):
        if not isinstance(raw, str):
            if isinstance(raw, list):
                raw = tuple(tuple(x) if isinstance(x, list) else x for x in raw)
            return raw
        try:
            if key in cls._PARSERS:
                return cls._PARSERS[key](raw)
            if typ in (bool, "bool"):
                return _bool(raw)
            if typ in (int, "int"):
                return int(raw)
            if typ in (float, "float"):
                return float(raw)
            return raw.strip()
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {raw!r} ({exc})") from exc

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, overrides)

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            has_header = any(ln.strip().startswith("[") for ln in text.splitlines())
            cp.read_string(text if has_header else f"[{_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigurationError(f"unparseable config: {exc}") from exc
        if not cp.has_section(_SECTION):
            raise ConfigurationError(f"config has no [{_SECTION}] section")
        data = dict(cp[_SECTION])
        cfg = cls.from_mapping(data)
        if overrides:
            cfg = cls.from_mapping(overrides, base=cfg)
        return cfg

    # -- validation -------------------------------------------------------
    def validate(self):
        def bad(msg):
            raise ConfigurationError(msg)

        for name in ("nu", "sigma", "lam", "dt", "t_avg", "eps_wa"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                bad(f"{name} must be a positive number, got {v!r}")
        if self.t_burn is not None and not self.t_burn >= 0:
            bad("t_burn must be nonnegative")
        if self.d not in (2, 3):
            bad("d must be 2 or 3")
        if self.m < 4 or self.m & (self.m - 1):
            bad("m must be a power of two >= 4")
        if self.scheme not in ("strang", "expeuler"):
            bad("scheme must be strang or expeuler")
        if self.padding not in (1, 2):
            bad("padding must be 1 or 2")
        if self.cutoff not in ("smooth", "sharp"):
            bad("cutoff must be smooth or sharp")
        if self.flux_form not in ("corrected", "literal"):
            bad("flux_form must be corrected or literal")
        if not 0 < self.annulus_lo < 1 < self.annulus_hi:
            bad("annulus must satisfy 0 < annulus_lo < 1 < annulus_hi")
        if self.n_batches < 2:
            bad("n_batches must be >= 2")
        if self.sample_every is not None and self.sample_every < 1:
            bad("sample_every must be >= 1")
        if self.sweep_mode not in ("zip", "product"):
            bad("sweep_mode must be zip or product")
        for lo, hi in self.slope_ranges:
            if not 0 < lo < hi:
                bad(f"slope range {lo}:{hi} is empty")
        if any(not N > 0 for N in self.balance_shells):
            bad("balance shells must be positive")
        if self.seed < 0:
            bad("seed must be nonnegative")

    # -- derived ----------------------------------------------------------
    @property
    def resolved_t_burn(self) -> float:
        if self.t_burn is not None:
            return float(self.t_burn)
        return 5.0 / (self.nu * (1.0 + self.annulus_lo**2))

    @property
    def resolved_sample_every(self) -> int:
        return self.sample_every or max(1, math.ceil(0.1 / self.dt - 1e-9))

    def params(self) -> SimParams:
        return SimParams(nu=self.nu, sigma=self.sigma, lam=self.lam, dt=self.dt,
                         t_burn=self.resolved_t_burn, t_avg=self.t_avg, seed=self.seed,
                         d=self.d, m=self.m)

    def replace(self, **kw) -> "RunConfig":
        return RunConfig.from_mapping(kw, base=self)

    def resolved(self) -> dict:
        out = dataclasses.asdict(self)
        out["t_burn"] = self.resolved_t_burn
        out["sample_every"] = self.resolved_sample_every
        # the output location never influences results, and keeping it out
        # lets two copies of one run compare byte-for-byte
        out.pop("out")
        return out

    # -- serialisation ----------------------------------------------------
    def to_text(self) -> str:
        """Fully resolved key = value text that re-parses to an equivalent config."""
        lines = []
        for key, val in self.resolved().items():
            if val is None:
                text = "all" if key == "forcing_count" else "auto"
            elif isinstance(val, bool):
                text = "true" if val else "false"
            elif key == "slope_ranges":
                text = ", ".join(f"{lo!r}:{hi!r}" for lo, hi in val)
            elif isinstance(val, tuple):
                text = ", ".join(repr(float(x)) for x in val)
            elif isinstance(val, float):
                text = repr(val)
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True, indent=2)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()
