"""Command line entry point (``nodal-lab``)."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from . import fem, nodal, reports
from . import mesh as meshing
from .config import ConfigError, SweepConfig, load_config
from .spectra import BoundaryCondition, SpectrumError, annulus_eigenvalues, disk_eigenvalues, select_radii

log = logging.getLogger("nodal_lab")


def _bc(variant: str, beta: float) -> BoundaryCondition:
    if variant == "dirichlet":
        return BoundaryCondition.dirichlet()
    if beta == 0:
        return BoundaryCondition.neumann()
    return BoundaryCondition.robin(beta)


def _config(args) -> SweepConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SweepConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    for name, key in (("variant", "bc_variant"), ("n", "solve_n"), ("eps", "solve_eps"), ("h", "h")):
        value = getattr(args, name, None)
        if value is not None:
            over[key] = value
    return replace(cfg, **over) if over else cfg


def _emit(rows: list[list], header: list[str], out: Path | None) -> None:
    """Print ``rows`` as CSV, and also write them to ``out`` when given."""
    text_rows = [[reports._fmt(v) if not isinstance(v, str) else v for v in row] for row in rows]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(text_rows)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(text_rows)


def cmd_radii(args) -> int:
    sel = select_radii(args.area, _bc(args.variant, args.beta), delta=args.delta)
    r = sel.radii
    rows = [
        ["R0", sel.r0],
        ["R1", r.r1],
        ["R2", r.r2],
        ["R3", r.r3],
        ["lambda1_ball", sel.lambda1_ball],
        ["mu1_annulus", sel.mu1_annulus],
        ["lambda2_ball", sel.lambda2_ball],
        ["area_residual", sel.area_residual],
        ["gap_residual", sel.gap_residual],
        ["ordered", sel.ordered],
        ["min_admissible_n", r.min_admissible_n()],
    ]
    _emit(rows, ["quantity", "value"], args.out)
    return 0


def cmd_spectrum(args) -> int:
    bc = _bc(args.variant, args.beta)
    if args.domain == "disk":
        modes = disk_eigenvalues(args.radius, bc, args.count)
    else:
        if args.inner is None or args.outer is None:
            raise SystemExit("annulus needs --inner and --outer")
        modes = annulus_eigenvalues(args.inner, args.outer, bc, args.count)
    rows = [[m.value, m.angular_order, m.radial_index, m.multiplicity] for m in modes]
    _emit(rows, ["eigenvalue", "angular_order", "radial_index", "multiplicity"], args.out)
    return 0


def cmd_solve(args) -> int:
    cfg = _config(args)
    ctx, spec, eps = ex.resolve_domain(cfg)
    c = ctx.config
    m = meshing.triangulate(spec, c.h, points_per_wave=c.points_per_wave)
    sol = fem.solve_mesh(m, c.bc, count=c.count, seed=c.seed)
    psi = sol.vector(1)
    ns = nodal.extract_nodal_set(m, psi, dirichlet=c.bc.is_dirichlet)
    rows = [[f"mu{j + 1}", float(v)] for j, v in enumerate(sol.eigenvalues)]
    rows += [
        ["n", spec.n],
        ["eps", eps],
        ["mu1_annulus", ctx.mu1_annulus],
        ["R_nodal_ball", nodal.nodal_ball_radius(float(sol.eigenvalues[1]))],
        ["nodal_length", ns.length],
        ["nodal_domains", ns.nodal_domain_count],
        ["touches_boundary", ns.touches_boundary],
        ["interior_verdict", nodal.interior_verdict(m, psi, dirichlet=c.bc.is_dirichlet, nodal=ns)],
        ["vertices", m.n_vertices],
    ]
    _emit(rows, ["quantity", "value"], args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    progress = lambda r: log.info("accepted n=%d eps=%.6g mu2=%.10g verdict=%s", r.n, r.eps, r.mu2, r.interior_verdict)
    try:
        res = ex.run_sweep(cfg, progress=progress)
    except ex.SweepAborted as exc:
        log.error("%s", exc)
        part = exc.partial
        reports.emit_reports(part.records, args.out, part.context.r0, part.context.radii)
        return 2
    reports.emit_reports(res.records, args.out, res.context.r0, res.context.radii)
    for note in res.notes:
        print(f"note: {note}")
    for key, value in res.checks.items():
        print(f"check {key} = {value}")
    print(f"verdict {res.verdict} ({len(res.records)} records, {res.seconds:.1f} s)")
    return 0


def cmd_beta_sweep(args) -> int:
    cfg = _config(args)
    grid = [float(s) for s in args.grid.split(",")] if args.grid else list(cfg.beta_grid)
    ctx, spec, eps = ex.resolve_domain(cfg)
    table = ex.beta_transition(spec, grid, ctx.config.h, seed=ctx.config.seed, points_per_wave=ctx.config.points_per_wave)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        reports.write_beta_table(table, out / "beta.csv")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["beta", "interior_verdict", "mu2", "lambda1", "mu2_below_lambda1"])
    for r in table.rows:
        w.writerow([reports._fmt(v) for v in (r.beta, r.interior_verdict, r.mu2, r.lambda1, r.below_lambda1)])
    print(f"domain n={spec.n} eps={eps:.6g}")
    print(f"mechanism_ok {table.mechanism_ok}")
    print(f"monotone {table.monotone}" + ("" if table.monotone else " (counterexample candidate)"))
    print(f"transition_beta {table.transition_beta if not math.isnan(table.transition_beta) else 'none'}")
    print(f"continuity_error {table.continuity_error:.3g}")
    return 0


def cmd_mesh(args) -> int:
    cfg = _config(args)
    ctx, spec, eps = ex.resolve_domain(cfg)
    m = meshing.triangulate(spec, ctx.config.h, points_per_wave=ctx.config.points_per_wave)
    meshing.write_mesh(m, args.export)
    q = meshing.quality_report(m)
    print(f"n={spec.n} eps={eps:.6g} vertices={m.n_vertices} triangles={m.n_triangles} min_angle={q['min_angle']:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nodal-lab", description="Nodal lines of second Robin/Dirichlet eigenfunctions.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (default: config value, else 0)")
        if config:
            sp.add_argument("--config", type=Path, help="TOML config file (defaults if omitted)")
            sp.add_argument("--variant", choices=("robin", "dirichlet"), help="override the config variant")
            sp.add_argument("--h", type=float, help="override the mesh size")

    sp = sub.add_parser("radii", help="three radii of the disk-plus-annulus construction")
    common(sp, config=False)
    sp.add_argument("--area", type=float, default=math.pi)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--variant", choices=("robin", "dirichlet"), default="robin")
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_radii)

    sp = sub.add_parser("spectrum", help="analytic disk or annulus eigenvalues")
    common(sp, config=False)
    sp.add_argument("--domain", choices=("disk", "annulus"), required=True)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--inner", type=float)
    sp.add_argument("--outer", type=float)
    sp.add_argument("--variant", choices=("robin", "dirichlet"), default="dirichlet")
    sp.add_argument("--beta", type=float, default=1.0, help="Robin parameter; 0 means Neumann")
    sp.add_argument("--count", type=int, default=6)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("solve", help="FEM eigenpairs of one composite domain")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="the (n, eps(n)) sweep with reports")
    common(sp)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("beta-sweep", help="interior verdict across a beta grid on one domain")
    common(sp)
    sp.add_argument("--grid", help="comma-separated ascending betas starting at 0")
    sp.add_argument("--n", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_beta_sweep)

    sp = sub.add_parser("mesh", help="mesh one composite domain and export it")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--export", type=Path, required=True)
    sp.set_defaults(func=cmd_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, SpectrumError, ValueError, ex.EpsScheduleExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
