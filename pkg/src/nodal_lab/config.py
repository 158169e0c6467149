"""Sweep configuration and its TOML form.

Every field has a documented default.  Fields left as ``None`` are filled per
boundary-condition variant by :meth:`SweepConfig.resolved`, because the Robin
and Dirichlet sweeps need different radii, cores and angle grids.

Example file::

    seed = 0

    [domain]
    area = 3.141592653589793   # M
    variant = "robin"          # or "dirichlet"
    beta = 1.0
    radii_delta = 0.1          # R2 from lambda_1(B_R2) = delta * mu_1(A)
    core = "perturbed"         # or "disk"

    [sweep]
    n_schedule = [4, 6, 8, 12, 16]
    eps_start = 0.05           # clipped to 0.95 * pi / (2n)
    eps_ratio = 0.5
    eps_floor = 1.5e-4

    [tolerances]
    mu2_gap = 0.04             # relative mu2 gap allowed at the last n
    gap_power = 3.0            # and (n_last / n)^gap_power times that before
    simplicity = 0.005
    mass = 0.01                # fraction of |A|

    [mesh]
    h = 0.05
    points_per_wave = 24

    [margins]
    delta0 = 0.12              # kappa and sigma disks are B(R1 - delta)
    delta1 = 0.16

    [solve]                    # single-domain commands
    n = 16
    eps = 0.001

    [beta_sweep]
    grid = [0.0, 0.01, 0.1, 1.0, 10.0]
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .spectra import BoundaryCondition

VARIANTS = ("robin", "dirichlet")

# Per-variant defaults; see the module docstring for the meaning of each key.
VARIANT_DEFAULTS = {
    "robin": dict(
        radii_delta=0.1,
        core="perturbed",
        eps_start=0.05,
        eps_ratio=0.5,
        eps_floor=1.5e-4,
        mu2_gap_tol=0.04,
        gap_tol_power=3.0,
    ),
    "dirichlet": dict(
        radii_delta=0.5,
        core="disk",
        eps_start=0.4,
        eps_ratio=0.75,
        eps_floor=0.02,
        mu2_gap_tol=0.006,
        gap_tol_power=2.0,
    ),
}

DEFAULT_BETA_GRID = (0.0, 0.001, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0)

_SECTIONS = {
    "domain": {"area": "M", "variant": "bc_variant", "beta": "beta", "radii_delta": "radii_delta", "core": "core"},
    "sweep": {"n_schedule": "n_schedule", "eps_start": "eps_start", "eps_ratio": "eps_ratio", "eps_floor": "eps_floor"},
    "tolerances": {
        "mu2_gap": "mu2_gap_tol",
        "gap_power": "gap_tol_power",
        "simplicity": "simplicity_tol",
        "mass": "mass_tol",
    },
    "mesh": {"h": "h", "points_per_wave": "points_per_wave"},
    "margins": {"delta0": "delta0", "delta1": "delta1"},
    "solve": {"n": "solve_n", "eps": "solve_eps", "count": "count"},
    "beta_sweep": {"grid": "beta_grid"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    M: float = math.pi
    beta: float = 1.0
    bc_variant: str = "robin"
    n_schedule: tuple[int, ...] = (4, 6, 8, 12, 16)
    eps_start: float | None = None
    eps_ratio: float | None = None
    eps_floor: float | None = None
    mu2_gap_tol: float | None = None
    gap_tol_power: float | None = None
    simplicity_tol: float = 0.005
    mass_tol: float = 0.01
    h: float = 0.05
    points_per_wave: int = 24
    delta0: float | None = None
    delta1: float | None = None
    seed: int = 0
    radii_delta: float | None = None
    core: str | None = None
    count: int = 3
    solve_n: int | None = None
    solve_eps: float | None = None
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n_schedule", tuple(int(n) for n in self.n_schedule))
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        if self.bc_variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.bc_variant!r}")
        if not self.M > 0:
            raise ConfigError("area must be positive")
        if self.bc_variant == "robin" and not self.beta > 0:
            raise ConfigError("the Robin construction needs beta > 0")
        if not self.n_schedule or any(n < 1 for n in self.n_schedule):
            raise ConfigError("n_schedule must be a nonempty list of positive integers")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.core not in (None, "perturbed", "disk"):
            raise ConfigError(f"unknown core {self.core!r}")
        if self.count < 3:
            raise ConfigError("at least three eigenpairs are needed")
        for name in ("eps_start", "eps_floor", "mu2_gap_tol", "radii_delta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.eps_ratio is not None and not 0 < self.eps_ratio < 1:
            raise ConfigError("eps_ratio must lie in (0, 1)")
        if self.gap_tol_power is not None and self.gap_tol_power < 0:
            raise ConfigError("gap_power must be nonnegative")
        if list(self.beta_grid) != sorted(self.beta_grid) or not self.beta_grid or self.beta_grid[0] < 0:
            raise ConfigError("beta grid must be ascending and nonnegative")

    @property
    def bc(self) -> BoundaryCondition:
        if self.bc_variant == "dirichlet":
            return BoundaryCondition.dirichlet()
        return BoundaryCondition.robin(self.beta)

    def resolved(self) -> "SweepConfig":
        """Copy with every per-variant ``None`` replaced by its default."""
        fill = {k: v for k, v in VARIANT_DEFAULTS[self.bc_variant].items() if getattr(self, k) is None}
        return replace(self, **fill)

    def eps_grid(self, n: int) -> list[float]:
        """Descending angle candidates for ``n``, starting below the sector limit."""
        c = self.resolved()
        top = min(c.eps_start, 0.95 * math.pi / (2 * n))
        if top <= c.eps_floor:
            return [top]
        count = int(math.floor(math.log(c.eps_floor / top) / math.log(c.eps_ratio))) + 1
        return [top * c.eps_ratio**k for k in range(count)]

    def gap_tolerance(self, n: int) -> float:
        c = self.resolved()
        return c.mu2_gap_tol * (self.n_schedule[-1] / n) ** c.gap_tol_power

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _flatten(data: dict) -> dict:
    out = {}
    for key, value in data.items():
        if key == "seed":
            out["seed"] = value
            continue
        if key not in _SECTIONS or not isinstance(value, dict):
            raise ConfigError(f"unknown config entry {key!r}")
        names = _SECTIONS[key]
        for k, v in value.items():
            if k not in names:
                raise ConfigError(f"unknown key {k!r} in [{key}]")
            out[names[k]] = v
    return out


def parse_config(text: str) -> SweepConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    kwargs = _flatten(data)
    known = {f.name for f in fields(SweepConfig)}
    return SweepConfig(**{k: v for k, v in kwargs.items() if k in known})


def load_config(path) -> SweepConfig:
    return parse_config(Path(path).read_text())
