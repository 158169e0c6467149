"""Separable spectra of disks and annuli, and the three-radii construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .special import Bracket, RootFindingError, bessel_jy, bessel_zeros, find_root

ROOT_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class BoundaryCondition:
    """``kind`` is ``"dirichlet"`` or ``"robin"``; Robin with ``beta == 0`` is Neumann."""

    kind: str = "robin"
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ValueError("beta must be finite and >= 0")

    @classmethod
    def dirichlet(cls) -> "BoundaryCondition":
        return cls("dirichlet", 0.0)

    @classmethod
    def robin(cls, beta: float) -> "BoundaryCondition":
        return cls("robin", float(beta))

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls("robin", 0.0)

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"

    @property
    def is_neumann(self) -> bool:
        return self.kind == "robin" and self.beta == 0.0

    def label(self) -> str:
        return "dirichlet" if self.is_dirichlet else f"robin(beta={self.beta:g})"


@dataclass(frozen=True)
class ModalEigenvalue:
    value: float
    angular_order: int
    radial_index: int
    multiplicity: int

    @property
    def wavenumber(self) -> float:
        return math.sqrt(self.value)


class SpectrumError(RuntimeError):
    """Root bracketing or nested solve failed; ``interval`` is the scanned range."""

    def __init__(self, msg: str, interval: tuple[float, float] | None = None):
        super().__init__(msg if interval is None else f"{msg} (scanned k in [{interval[0]:.6g}, {interval[1]:.6g}])")
        self.interval = interval


@lru_cache(maxsize=None)
def j01() -> float:
    """First positive zero of J_0."""
    return float(bessel_zeros(0, 1)[0])


@lru_cache(maxsize=None)
def j11() -> float:
    return float(bessel_zeros(1, 1)[0])


# ---------------------------------------------------------------------------
# characteristic functions, vectorised in k
# ---------------------------------------------------------------------------


def _disk_char(m: int, radius: float, bc: BoundaryCondition, k):
    j, dj, _, _ = bessel_jy(m, np.asarray(k) * radius)
    # the scale must not vanish at a root, so it carries both |J| and |J'|
    if bc.is_dirichlet:
        return j, np.abs(j) + np.abs(dj)
    val = k * dj + bc.beta * j
    return val, (k + bc.beta) * (np.abs(dj) + np.abs(j))


def _annulus_rows(m: int, inner: float, outer: float, bc: BoundaryCondition, k):
    ja, dja, ya, dya = bessel_jy(m, k * inner)
    jb, djb, yb, dyb = bessel_jy(m, k * outer)
    if bc.is_dirichlet:
        return (ja, ya), (jb, yb)
    b = bc.beta
    # outward normal is -d/dr on the inner circle, +d/dr on the outer one
    return (-k * dja + b * ja, -k * dya + b * ya), (k * djb + b * jb, k * dyb + b * yb)


def _annulus_char(m: int, inner: float, outer: float, bc: BoundaryCondition, k):
    k = np.asarray(k, dtype=float)
    (a0, a1), (b0, b1) = _annulus_rows(m, inner, outer, bc, k)
    return a0 * b1 - a1 * b0, np.abs(a0 * b1) + np.abs(a1 * b0)


def _scan_roots(char, k_lo: float, k_hi: float, step: float, limit: int) -> list[float]:
    """First ``limit`` roots of ``char`` in ``(k_lo, k_hi]`` from a uniform grid."""
    roots: list[float] = []
    chunk = 4000
    start = k_lo
    while start < k_hi and len(roots) < limit:
        stop = min(k_hi, start + chunk * step)
        grid = np.arange(start, stop + 0.5 * step, step)
        if grid.size < 2:
            break
        vals = char(grid)[0]
        flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        for i in flips:
            f = lambda t: float(char(np.array([t]))[0][0])
            tol = ROOT_TOL * max(1.0, grid[i])
            kstar = find_root(f, Bracket(float(grid[i]), float(grid[i + 1])), tol=tol)
            val, scale = char(np.array([kstar]))
            # a root located to within tol can leave |slope| * tol of residual
            slope = abs(vals[i + 1] - vals[i]) / step
            if abs(val[0]) > RESIDUAL_TOL * max(scale[0], 1e-300) + 4.0 * slope * tol and abs(val[0]) > 1e-14:
                # sign change across a pole-free cusp is impossible for these
                # entire functions, so a large residual means a bad bracket
                raise SpectrumError(f"root at k={kstar} fails residual check", (start, stop))
            roots.append(kstar)
            if len(roots) == limit:
                break
        start = float(grid[-1])
    return roots


def _enumerate(char_for_m, step: float, count: int, k_guess: float, has_zero_mode: bool) -> list[ModalEigenvalue]:
    k_max = k_guess
    for _ in range(12):
        modes: list[tuple[float, int, int]] = []
        m = 0
        while True:
            ks = _scan_roots(char_for_m(m), 0.5 * step, k_max, step, limit=count)
            if m == 0 and has_zero_mode:
                ks = [0.0] + ks
            if not ks:
                break
            modes.extend((k, m, i + 1) for i, k in enumerate(ks))
            m += 1
            if m > 50:
                break
        expanded = sum(1 if mm == 0 else 2 for _, mm, _ in modes)
        if expanded >= count:
            out: list[ModalEigenvalue] = []
            for k, mm, idx in sorted(modes):
                mult = 1 if mm == 0 else 2
                out.extend([ModalEigenvalue(k * k, mm, idx, mult)] * mult)
            return out[:count]
        k_max *= 2.0
    raise SpectrumError(f"could not bracket {count} eigenvalues", (0.0, k_max))


def disk_eigenvalues(radius: float, bc: BoundaryCondition, count: int) -> list[ModalEigenvalue]:
    """Lowest ``count`` eigenvalues of the disk, ascending, multiplicities expanded."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 1 <= count <= 50:
        raise ValueError("count must be in [1, 50]")
    step = 0.05 / radius
    k_guess = 2.0 * math.sqrt(4.0 * count) / radius + 6.0 / radius
    return _enumerate(lambda m: (lambda k: _disk_char(m, radius, bc, k)), step, count, k_guess, bc.is_neumann)


def annulus_eigenvalues(inner: float, outer: float, bc: BoundaryCondition, count: int) -> list[ModalEigenvalue]:
    """Lowest ``count`` eigenvalues of the annulus ``inner < r < outer``."""
    if not 0 < inner < outer:
        raise ValueError("annulus requires 0 < inner < outer")
    if not 1 <= count <= 50:
        raise ValueError("count must be in [1, 50]")
    step = 0.05 / outer
    width = outer - inner
    k_guess = 2.0 * math.sqrt(4.0 * count * math.pi / (math.pi * (outer**2 - inner**2))) + 4.0 / width
    return _enumerate(
        lambda m: (lambda k: _annulus_char(m, inner, outer, bc, k)), step, count, k_guess, bc.is_neumann
    )


def disk_first_eigenvalue(radius: float, bc: BoundaryCondition) -> float:
    if bc.is_dirichlet:
        return (j01() / radius) ** 2
    if bc.is_neumann:
        return 0.0
    step = 0.05 / radius
    ks = _scan_roots(lambda k: _disk_char(0, radius, bc, k), 0.5 * step, j01() / radius + step, step, 1)
    return ks[0] ** 2


def annulus_first_eigenvalue(inner: float, outer: float, bc: BoundaryCondition) -> float:
    """Radial ground state of the annulus (simple, angular order 0)."""
    if not 0 < inner < outer:
        raise ValueError("annulus requires 0 < inner < outer")
    if bc.is_neumann:
        return 0.0
    step = 0.05 / outer
    # the first Dirichlet root lies below pi/width (1-D comparison); Robin lies lower still
    k_hi = math.pi / (outer - inner) + 2.0 * step
    ks = _scan_roots(lambda k: _annulus_char(0, inner, outer, bc, k), 0.5 * step, k_hi, step, 1)
    if not ks:
        raise SpectrumError("no radial root found", (0.5 * step, k_hi))
    return ks[0] ** 2


def radius_from_eigenvalue(mu: float) -> float:
    """Radius of the disk whose first Dirichlet eigenvalue equals ``mu``."""
    if not mu > 0:
        raise ValueError("eigenvalue must be positive")
    return j01() / math.sqrt(mu)


# ---------------------------------------------------------------------------
# three-radii construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiiTriple:
    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        if not 0 < self.r1 < self.r2 < self.r3:
            raise ValueError(f"radii must satisfy 0 < r1 < r2 < r3, got {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r1, self.r2, self.r3)

    def min_admissible_n(self) -> int:
        """Smallest n with ``(1 + 1/n) r1 < r2``, so the perturbed disk misses the annulus."""
        return math.floor(self.r1 / (self.r2 - self.r1)) + 1


@dataclass
class RadiiSelection:
    radii: RadiiTriple
    area: float
    target_area: float
    lambda1_ball: float
    lambda2_ball: float
    mu1_annulus: float
    delta: float
    bc: BoundaryCondition
    diagnostics: dict = field(default_factory=dict)

    @property
    def area_residual(self) -> float:
        return abs(self.area - self.target_area)

    @property
    def gap_residual(self) -> float:
        """Relative mismatch of the two gaps around ``mu1_annulus``."""
        upper = self.lambda2_ball - self.mu1_annulus
        lower = self.mu1_annulus - self.lambda1_ball
        return abs(upper - lower) / self.mu1_annulus

    @property
    def ordered(self) -> bool:
        return self.lambda1_ball < self.mu1_annulus < self.lambda2_ball

    @property
    def r0(self) -> float:
        return radius_from_eigenvalue(self.mu1_annulus)


def _annulus_ground(bc: BoundaryCondition):
    # the Dirichlet variant of the construction compares against lambda_1(A)
    return lambda a, b: annulus_first_eigenvalue(a, b, bc)


def select_radii(M: float, bc: BoundaryCondition, delta: float = 0.5, tol: float = 1e-13) -> RadiiSelection:
    """Radii ``R1 < R2 < R3`` of a disk plus annulus of total area ``M``.

    Step one fixes ``R2`` by ``lambda_1(B_R2) = delta * mu_1(A_{R2,R3'})`` with
    ``pi R3'^2 = M``; step two shrinks ``R1`` from ``R2`` while growing ``R3`` at
    constant area until ``mu_1(A)`` sits midway between the first two Dirichlet
    eigenvalues of ``B_R1``.
    """
    if not M > 0:
        raise ValueError("area must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if bc.is_neumann:
        raise ValueError("the construction needs beta > 0 (or Dirichlet)")
    ground = _annulus_ground(bc)
    a0, a1 = j01() ** 2, j11() ** 2
    r3p = math.sqrt(M / math.pi)
    scan: list[tuple[float, float]] = []

    def g(r2: float) -> float:
        val = a0 / r2**2 - delta * ground(r2, r3p)
        scan.append((r2, val))
        return val

    lo, hi = 0.5 * r3p, 0.5 * r3p
    while g(lo) <= 0:
        lo *= 0.5
        if lo < 1e-6 * r3p:
            raise SpectrumError(f"R2 search failed; scan={scan}")
    while g(hi) >= 0:
        hi = r3p - 0.5 * (r3p - hi)
        if r3p - hi < 1e-6 * r3p:
            raise SpectrumError(f"R2 search failed; scan={scan}")
    r2 = find_root(g, Bracket(lo, hi), tol=tol * r3p)

    def r3_of(r1: float) -> float:
        return math.sqrt(r2**2 + M / math.pi - r1**2)

    scan1: list[tuple[float, float]] = []

    def h(r1: float) -> float:
        val = (a0 + a1) / r1**2 - 2.0 * ground(r2, r3_of(r1))
        scan1.append((r1, val))
        return val

    if h(r2) >= 0:
        raise SpectrumError(
            f"gap equality unreachable for delta={delta}: already past the midpoint at R1=R2 (h={scan1[-1][1]:.4g})"
        )
    lo = 0.5 * r2
    while h(lo) <= 0:
        lo *= 0.5
        if lo < 1e-6 * r2:
            raise SpectrumError(f"R1 search failed; scan={scan1}")
    r1 = find_root(h, Bracket(lo, r2), tol=tol * r2)
    r3 = r3_of(r1)
    radii = RadiiTriple(r1, r2, r3)
    mu = ground(r2, r3)
    return RadiiSelection(
        radii=radii,
        area=math.pi * (r1**2 + r3**2 - r2**2),
        target_area=M,
        lambda1_ball=a0 / r1**2,
        lambda2_ball=a1 / r1**2,
        mu1_annulus=mu,
        delta=delta,
        bc=bc,
        diagnostics={"r2_scan": scan, "r1_scan": scan1},
    )
