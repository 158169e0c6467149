"""Sweeps over the composite domains Ω_{n,ε}.

For each n the angle ε(n) is the largest grid value passing four checks:
the second eigenvalue is close to μ₁(A), it is simple, the nodal ball sits
inside ``B(R1 - delta1)``, and almost none of the negative set lives in the
annulus.  The sweep then records nodal diagnostics for the accepted pair.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import fem
from . import geometry as geo
from . import mesh as meshing
from . import nodal
from .config import ConfigError, SweepConfig
from .spectra import BoundaryCondition, RadiiSelection, RadiiTriple, select_radii

log = logging.getLogger(__name__)

# Default δ margins as fractions of the usable gap between R0 and the core.
DELTA0_FRACTION = 0.2
DELTA1_FRACTION = 0.4
KAPPA_FLOOR = 1e-3
PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
CRITERIA = {
    "a": "mu2 gap",
    "b": "simplicity",
    "c": "nodal ball radius",
    "d": "negative mass in annulus",
}


class EpsScheduleExhausted(RuntimeError):
    def __init__(self, n: int, trials: list["EpsTrial"]):
        self.n = n
        self.trials = trials
        worst = ", ".join(f"eps={t.eps:.4g} failed {'+'.join(t.failed)}" for t in trials)
        super().__init__(f"no eps in the grid works for n={n}: {worst}")


class SweepAborted(RuntimeError):
    def __init__(self, stage: str, n: int, cause: Exception, partial: "SweepResult"):
        self.stage = stage
        self.n = n
        self.partial = partial
        super().__init__(f"sweep aborted at n={n} during {stage}: {cause}")


# ---------------------------------------------------------------------------
# context
# ---------------------------------------------------------------------------


@dataclass
class SweepContext:
    config: SweepConfig
    selection: RadiiSelection
    delta0: float
    delta1: float
    admissible: tuple[int, ...]
    skipped: dict[int, str]

    @property
    def radii(self) -> RadiiTriple:
        return self.selection.radii

    @property
    def r0(self) -> float:
        return self.selection.r0

    @property
    def mu1_annulus(self) -> float:
        return self.selection.mu1_annulus

    @property
    def bc(self) -> BoundaryCondition:
        return self.config.bc

    @property
    def r_inner(self) -> float:
        return self.radii.r1 - self.delta1

    @property
    def r_outer(self) -> float:
        return self.radii.r1 - self.delta0

    @property
    def annulus_area(self) -> float:
        return math.pi * (self.radii.r3**2 - self.radii.r2**2)

    def composite(self, n: int, eps: float) -> geo.Composite:
        return geo.Composite(self.radii, n, eps, core=self.config.core)


def _admissible(config: SweepConfig, radii: RadiiTriple) -> tuple[tuple[int, ...], dict[int, str]]:
    ok, skipped = [], {}
    for n in config.n_schedule:
        reach = (1 + 1 / n) * radii.r1 if config.core == "perturbed" else radii.r1
        if reach >= radii.r2:
            skipped[n] = f"inadmissible: core reaches r={reach:.6g} >= R2={radii.r2:.6g}"
        else:
            ok.append(n)
    return tuple(ok), skipped


def default_margins(radii: RadiiTriple, r0: float, core: str, ns) -> tuple[float, float]:
    """δ₀ < δ₁ measured from R1, placed between R0 and the inscribed core radius.

    For the disk core this is ``0.2 (R1 - R0)`` and ``0.4 (R1 - R0)``.  The
    perturbed core only contains ``B(R1 (1 - 1/n))``, so the same fractions are
    taken of the gap below the smallest inscribed radius in the sweep.
    """
    floor = radii.r1
    if core == "perturbed" and ns:
        floor = radii.r1 * (1 - 1 / min(ns))
    if floor <= r0:
        raise ConfigError(f"inscribed core radius {floor:.6g} does not exceed R0={r0:.6g}")
    shift = radii.r1 - floor
    return shift + DELTA0_FRACTION * (floor - r0), shift + DELTA1_FRACTION * (floor - r0)


def prepare(config: SweepConfig) -> SweepContext:
    config = config.resolved()
    selection = select_radii(config.M, config.bc, delta=config.radii_delta)
    admissible, skipped = _admissible(config, selection.radii)
    d0, d1 = default_margins(selection.radii, selection.r0, config.core, admissible)
    if config.delta0 is not None:
        d0 = config.delta0
    if config.delta1 is not None:
        d1 = config.delta1
    if not 0 < d0 < d1 < selection.radii.r1 - selection.r0:
        raise ConfigError(f"need 0 < delta0 < delta1 < R1 - R0, got {d0:.6g}, {d1:.6g}")
    return SweepContext(config, selection, d0, d1, admissible, skipped)


# ---------------------------------------------------------------------------
# one (n, eps) case
# ---------------------------------------------------------------------------


@dataclass
class Case:
    n: int
    eps: float
    mesh: meshing.Mesh
    solution: fem.EigenSolution
    nodal: nodal.NodalSet
    mass_in_A: float
    l2_in_B_R1: float
    mesh_seconds: float
    solve_seconds: float

    @property
    def mu(self) -> np.ndarray:
        return self.solution.eigenvalues

    @property
    def psi(self) -> np.ndarray:
        return self.solution.vector(1)

    @property
    def R_nodal_ball(self) -> float:
        return nodal.nodal_ball_radius(float(self.mu[1]))


def solve_case(ctx: SweepContext, n: int, eps: float, stage: list | None = None) -> Case:
    c = ctx.config
    stage = stage if stage is not None else []
    stage[:] = ["mesh"]
    t0 = time.perf_counter()
    m = meshing.triangulate(ctx.composite(n, eps), c.h, points_per_wave=c.points_per_wave)
    t1 = time.perf_counter()
    stage[:] = ["solve"]
    sol = fem.solve_mesh(m, c.bc, count=c.count, seed=c.seed)
    t2 = time.perf_counter()
    stage[:] = ["nodal"]
    psi = sol.vector(1)
    ns = nodal.extract_nodal_set(m, psi, dirichlet=c.bc.is_dirichlet)
    try:
        mass, l2 = nodal.mass_diagnostics(m, psi, ctx.radii)
    except nodal.NoNegativePartError:
        mass, l2 = math.inf, 0.0
    return Case(n, eps, m, sol, ns, mass, l2, t1 - t0, t2 - t1)


def failed_criteria(ctx: SweepContext, case: Case) -> list[str]:
    c = ctx.config
    mu1, mu2, mu3 = (float(v) for v in case.mu[:3])
    out = []
    if abs(mu2 - ctx.mu1_annulus) / ctx.mu1_annulus > c.gap_tolerance(case.n):
        out.append("a")
    if mu3 - mu2 < c.simplicity_tol * mu2:
        out.append("b")
    if not case.R_nodal_ball < ctx.r_inner:
        out.append("c")
    if not case.mass_in_A <= c.mass_tol * ctx.annulus_area:
        out.append("d")
    return out


@dataclass
class EpsTrial:
    eps: float
    mu2: float
    failed: list[str]


@dataclass
class EpsChoice:
    eps: float
    case: Case
    trials: list[EpsTrial]


def choose_eps(n: int, ctx: SweepContext, stage: list | None = None) -> EpsChoice:
    """Largest grid angle for which criteria (a)-(d) all hold."""
    if n not in ctx.config.n_schedule:
        raise ValueError(f"n={n} is not in the schedule")
    return _scan_eps(n, ctx, stage)


def _scan_eps(n: int, ctx: SweepContext, stage: list | None = None) -> EpsChoice:
    trials = []
    for eps in ctx.config.eps_grid(n):
        case = solve_case(ctx, n, eps, stage)
        bad = failed_criteria(ctx, case)
        trials.append(EpsTrial(eps, float(case.mu[1]), bad))
        log.info("n=%d eps=%.5g V=%d mu=%s failed=%s", n, eps, case.mesh.n_vertices, np.round(case.mu, 4), bad or "-")
        if not bad:
            return EpsChoice(eps, case, trials)
    raise EpsScheduleExhausted(n, trials)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass
class SweepRecord:
    n: int
    eps: float
    mu1: float
    mu2: float
    mu3: float
    mu2_gap: float
    simplicity_gap: float
    R_nodal_ball: float
    r_min: float
    rho: float
    nodal_length: float
    segment_count: int
    nodal_domains: int
    touches_boundary: bool
    boundary_distance: float
    sigma_in_disk: float
    sigma_lower_bound: float
    sigma_half_plane: float
    kappa: float
    interior_verdict: bool
    symmetry_defect: float
    mass_minus_in_A: float
    l2_mass_minus_in_B_R1: float
    mu1_core: float
    mu2_core: float
    vertices: int
    triangles: int
    eps_candidates: int
    mesh_seconds: float = field(default=0.0, metadata={"timing": True})
    solve_seconds: float = field(default=0.0, metadata={"timing": True})
    nodal_seconds: float = field(default=0.0, metadata={"timing": True})
    segments: np.ndarray | None = field(default=None, repr=False, compare=False, metadata={"artifact": True})
    outline: np.ndarray | None = field(default=None, repr=False, compare=False, metadata={"artifact": True})

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls) if not f.metadata]

    @classmethod
    def timing_columns(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.metadata.get("timing")]

    def localized(self, r0: float, h: float) -> bool:
        """Nodal radii inside ``(R0 - η, R0 + η)`` with ``η = 3|R_n - R0| + 2h``."""
        eta = 3 * abs(self.R_nodal_ball - r0) + 2 * h
        return r0 - eta < self.r_min and self.rho < r0 + eta

    def sandwich_ok(self, h: float) -> bool:
        return self.sigma_lower_bound <= self.sigma_in_disk + 2 * h * self.segment_count


def core_spectrum(radii: RadiiTriple, n: int, bc: BoundaryCondition, h: float, core: str = "perturbed", points_per_wave: int = 24, seed: int = 0):
    """First two FEM eigenvalues of the core alone (U_n, or B_{R1})."""
    spec = geo.PerturbedDisk(radii.r1, n) if core == "perturbed" else geo.Disk(radii.r1)
    m = meshing.triangulate(spec, h, points_per_wave=points_per_wave)
    sol = fem.solve_mesh(m, bc, count=2, seed=seed)
    return float(sol.eigenvalues[0]), float(sol.eigenvalues[1])


def _outline(m: meshing.Mesh) -> np.ndarray:
    return m.vertices[m.boundary_edges]


def make_record(ctx: SweepContext, choice: EpsChoice) -> SweepRecord:
    c = ctx.config
    case = choice.case
    t0 = time.perf_counter()
    ns = case.nodal
    mu1, mu2, mu3 = (float(v) for v in case.mu[:3])
    R = case.R_nodal_ball
    if ns.empty:
        lo = hi = math.nan
    else:
        lo, hi, _ = nodal.radial_interval(ns)
    psi = case.psi
    verdict = nodal.interior_verdict(case.mesh, psi, dirichlet=c.bc.is_dirichlet, nodal=ns)
    sigma = nodal.sigma_in_disk(ns, ctx.r_inner)
    kap = nodal.kappa(case.mesh, psi, ctx.r_inner, ctx.r_outer)
    sym = nodal.symmetry_defect(case.mesh, psi, case.n)
    t1 = time.perf_counter()
    core1, core2 = core_spectrum(ctx.radii, case.n, c.bc, c.h, c.core, c.points_per_wave, c.seed)
    return SweepRecord(
        n=case.n,
        eps=case.eps,
        mu1=mu1,
        mu2=mu2,
        mu3=mu3,
        mu2_gap=(mu2 - ctx.mu1_annulus) / ctx.mu1_annulus,
        simplicity_gap=(mu3 - mu2) / mu2,
        R_nodal_ball=R,
        r_min=lo,
        rho=hi,
        nodal_length=ns.length,
        segment_count=len(ns.segments),
        nodal_domains=ns.nodal_domain_count,
        touches_boundary=ns.touches_boundary,
        boundary_distance=nodal.nodal_boundary_distance(case.mesh, ns),
        sigma_in_disk=sigma,
        sigma_lower_bound=case.n * (min(ctx.r_inner, hi) - R),
        sigma_half_plane=nodal.sigma_in_half_plane(ns),
        kappa=kap,
        interior_verdict=verdict,
        symmetry_defect=sym,
        mass_minus_in_A=case.mass_in_A,
        l2_mass_minus_in_B_R1=case.l2_in_B_R1,
        mu1_core=core1,
        mu2_core=core2,
        vertices=case.mesh.n_vertices,
        triangles=case.mesh.n_triangles,
        eps_candidates=len(choice.trials),
        mesh_seconds=case.mesh_seconds,
        solve_seconds=case.solve_seconds,
        nodal_seconds=t1 - t0,
        segments=ns.segments,
        outline=_outline(case.mesh),
    )


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    context: SweepContext
    records: list[SweepRecord]
    verdict: str
    notes: list[str]
    checks: dict
    seconds: float = 0.0

    @property
    def config(self) -> SweepConfig:
        return self.context.config


def sweep_checks(ctx: SweepContext, records: list[SweepRecord]) -> dict:
    """Verdict ingredients and the trend diagnostics, all as plain values."""
    c = ctx.config
    out: dict = {"records": len(records), "final_n": c.n_schedule[-1]}
    if not records:
        return out
    last = records[-1]
    out["final_present"] = last.n == c.n_schedule[-1]
    out["final_interior"] = bool(last.interior_verdict)
    out["final_two_domains"] = last.nodal_domains == 2
    out["final_simple"] = last.simplicity_gap > 0
    out["localized_last_two"] = len(records) >= 2 and all(r.localized(ctx.r0, c.h) for r in records[-2:])
    out["eps_nonincreasing"] = all(b.eps <= a.eps for a, b in zip(records, records[1:]))
    first = records[0]
    out["R_gap_first"], out["R_gap_last"] = abs(first.R_nodal_ball - ctx.r0), abs(last.R_nodal_ball - ctx.r0)
    out["rho_gap_first"], out["rho_gap_last"] = abs(first.rho - ctx.r0), abs(last.rho - ctx.r0)
    sig = [r.sigma_in_disk for r in records]
    out["sigma_ratio"] = max(sig) / min(sig) if min(sig) > 0 else math.inf
    out["sandwich_ok"] = all(r.sandwich_ok(c.h) for r in records)
    kap = [r.kappa for r in records]
    out["kappa_min"] = min(kap) if not any(math.isnan(k) for k in kap) else math.nan
    out["kappa_ok"] = out["kappa_min"] > KAPPA_FLOOR
    return out


def sweep_verdict(checks: dict) -> str:
    if checks.get("records", 0) < 2 or not checks.get("final_present"):
        return INCONCLUSIVE
    keys = ("final_interior", "final_two_domains", "final_simple", "localized_last_two")
    return PASS if all(checks[k] for k in keys) else FAIL


def run_sweep(config: SweepConfig, progress=None) -> SweepResult:
    """Choose ε(n), solve and record every admissible n of the schedule.

    n values that are geometrically inadmissible, or for which no grid angle
    passes the criteria, are skipped with a note.  Any other failure raises
    :class:`SweepAborted` carrying the records gathered so far.
    """
    start = time.perf_counter()
    ctx = prepare(config)
    records: list[SweepRecord] = []
    notes = [f"n={n} skipped: {why}" for n, why in ctx.skipped.items()]
    for n in ctx.config.n_schedule:
        if n not in ctx.admissible:
            continue
        stage = ["eps selection"]
        try:
            choice = choose_eps(n, ctx, stage)
            stage[:] = ["diagnostics"]
            rec = make_record(ctx, choice)
        except EpsScheduleExhausted as exc:
            notes.append(f"n={n} skipped: {exc}")
            log.info("%s", notes[-1])
            continue
        except Exception as exc:
            partial = SweepResult(ctx, records, INCONCLUSIVE, notes, sweep_checks(ctx, records), time.perf_counter() - start)
            raise SweepAborted(stage[0], n, exc, partial) from exc
        records.append(rec)
        if progress is not None:
            progress(rec)
    checks = sweep_checks(ctx, records)
    return SweepResult(ctx, records, sweep_verdict(checks), notes, checks, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# beta transition
# ---------------------------------------------------------------------------


@dataclass
class BetaRow:
    beta: float
    interior_verdict: bool
    mu2: float
    lambda1: float

    @property
    def below_lambda1(self) -> bool:
        return self.mu2 < self.lambda1


@dataclass
class BetaTable:
    rows: list[BetaRow]
    mechanism_ok: bool
    monotone: bool
    transition_beta: float
    neumann_mu2: float
    continuity_error: float

    @property
    def counterexample_candidate(self) -> bool:
        return not self.monotone


def _robin_or_neumann(beta: float) -> BoundaryCondition:
    return BoundaryCondition.neumann() if beta == 0 else BoundaryCondition.robin(beta)


def beta_transition(spec: geo.DomainSpec, beta_grid, h: float, seed: int = 0, points_per_wave: int = 24) -> BetaTable:
    """Interior verdict of ψ₂ for each β on one fixed mesh, against λ₁(Ω).

    The mechanism check asks that every β with ``μ₂(β) < λ₁(Ω)`` has a nodal
    line meeting the boundary.  A verdict sequence other than false-then-true
    is flagged, not treated as an error.
    """
    grid = [float(b) for b in beta_grid]
    if grid != sorted(grid) or not grid or grid[0] != 0.0:
        raise ValueError("beta grid must be ascending and start at 0")
    m = meshing.triangulate(spec, h, points_per_wave=points_per_wave)
    K, M, B = fem.assemble(m)
    lam1 = float(
        fem.solve_eigs(K, M, B, BoundaryCondition.dirichlet(), 1, seed=seed, boundary_mask=m.boundary_mask).eigenvalues[0]
    )
    rows = []
    for beta in grid:
        bc = _robin_or_neumann(beta)
        sol = fem.solve_eigs(K, M, B, bc, 3, seed=seed, boundary_mask=m.boundary_mask)
        psi = sol.vector(1)
        verdict = nodal.interior_verdict(m, psi, dirichlet=False)
        rows.append(BetaRow(beta, verdict, float(sol.eigenvalues[1]), lam1))
        log.info("beta=%g mu2=%.6g lambda1=%.6g verdict=%s", beta, rows[-1].mu2, lam1, verdict)
    flags = [r.interior_verdict for r in rows]
    first_true = flags.index(True) if True in flags else len(flags)
    monotone = all(flags[first_true:]) and not any(flags[:first_true])
    mechanism = all(not r.interior_verdict for r in rows if r.below_lambda1)
    transition = grid[first_true] if first_true < len(grid) else math.nan
    pos = [r for r in rows if r.beta > 0][:2]
    if len(pos) == 2:
        b1, b2 = pos
        extrapolated = b1.mu2 - b1.beta * (b2.mu2 - b1.mu2) / (b2.beta - b1.beta)
        cont = abs(extrapolated - rows[0].mu2) / max(1.0, abs(rows[0].mu2))
    else:
        cont = math.nan
    return BetaTable(rows, mechanism, monotone, transition, rows[0].mu2, cont)


def resolve_domain(config: SweepConfig) -> tuple[SweepContext, geo.Composite, float]:
    """Composite for single-domain commands: ``[solve]`` n and eps, else ε chosen for the last admissible n."""
    ctx = prepare(config)
    c = ctx.config
    n = c.solve_n if c.solve_n is not None else (ctx.admissible[-1] if ctx.admissible else c.n_schedule[-1])
    if c.solve_eps is not None:
        eps = c.solve_eps
    else:
        eps = _scan_eps(n, ctx).eps
    return ctx, ctx.composite(n, eps), eps
