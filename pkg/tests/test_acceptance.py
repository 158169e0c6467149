"""Acceptance criteria 1-11, each at its stated tolerance.

Every test files one pass/fail line with the measured numbers; the lines are
printed together at the end of the session.  Criteria that the method does
not reach are run as written and marked strict xfail, so a silent fix would
show up as an unexpected pass.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

import conftest
import oracles
from nodal_lab import experiments as ex
from nodal_lab import fem
from nodal_lab import geometry as geo
from nodal_lab import mesh as meshing
from nodal_lab.config import SweepConfig
from nodal_lab.special import bessel_j, bessel_j_deriv, find_root
from nodal_lab.spectra import BoundaryCondition, select_radii

D = BoundaryCondition.dirichlet()
R1 = BoundaryCondition.robin(1.0)
pytestmark = pytest.mark.slow

J01, J11, J1P1 = 2.404825557695773, 3.831705970207512, 1.841183781340659


def report(key, ok, detail):
    conftest.ACCEPTANCE_LINES[key] = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}"
    return ok


class Timed:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def sweeps():
    out = {}
    for variant in ("robin", "dirichlet"):
        out[variant] = ex.run_sweep(SweepConfig(bc_variant=variant))
    return out


@pytest.fixture(scope="module")
def robin_beta(sweeps):
    res = sweeps["robin"]
    last = res.records[-1]
    c = res.config
    with Timed() as t:
        table = ex.beta_transition(res.context.composite(last.n, last.eps), c.beta_grid, c.h, seed=c.seed, points_per_wave=c.points_per_wave)
    return last, table, t.seconds


# 1 ------------------------------------------------------------------------


def test_1_bessel_zeros():
    with Timed() as t:
        library = [
            find_root(lambda x: float(bessel_j(0, x)), (2.0, 3.0)),
            find_root(lambda x: float(bessel_j(1, x)), (3.0, 4.5)),
            find_root(lambda x: float(bessel_j_deriv(1, x)), (1.5, 2.2)),
        ]
        series = [
            find_root(lambda x: oracles.j_series(0, x), (2.0, 3.0)),
            find_root(lambda x: oracles.j_series(1, x), (3.0, 4.5)),
            find_root(lambda x: oracles.j_prime_series(1, x), (1.5, 2.2)),
        ]
    want = [J01, J11, J1P1]
    err = max(abs(a - w) for a, w in zip(library + series, want + want))
    ok = report("1", err <= 1e-11 and t.seconds < 1.0, f"max zero error {err:.2e} (tol 1e-11), {t.seconds:.2f} s")
    assert ok


# 2 ------------------------------------------------------------------------


def _refinement(bc, exact):
    m = meshing.triangulate(geo.Disk(1.0), 0.05)
    errs = []
    for i in range(4):
        errs.append(abs(fem.solve_mesh(m, bc, count=1).eigenvalues[0] - exact))
        if i < 3:
            m = meshing.refine(m)
    return errs, [math.log2(a / b) for a, b in zip(errs, errs[1:])]


def test_2_fem_convergence():
    with Timed() as t:
        d_errs, d_rates = _refinement(D, J01**2)
        r_errs, r_rates = _refinement(R1, oracles.ROBIN_DISK_K**2)
    d_rel, r_rel = d_errs[0] / J01**2, r_errs[0] / oracles.ROBIN_DISK_K**2
    ok = d_rel < 0.01 and r_rel < 0.01 and all(abs(r - 2) <= 0.3 for r in d_rates + r_rates) and t.seconds < 30
    rates = ", ".join(f"{r:.2f}" for r in d_rates + r_rates)
    assert report("2", ok, f"h=0.05 errors {d_rel:.2e} (Dirichlet) {r_rel:.2e} (Robin), orders {rates}, {t.seconds:.1f} s")


# 3 ------------------------------------------------------------------------


def test_3_square():
    m = meshing.triangulate(geo.Polygon.rectangle(0.0, 0.0, math.pi, math.pi), 0.05)
    vals = fem.solve_mesh(m, D, count=4).eigenvalues
    rel = np.abs(vals / np.array([2.0, 5.0, 5.0, 8.0]) - 1).max()
    assert report("3", rel <= 0.01, f"square spectrum {np.round(vals, 4).tolist()}, max rel error {rel:.2e}")


# 4 ------------------------------------------------------------------------


def test_4_radii():
    details, ok = [], True
    with Timed() as t:
        for name, bc, delta in (("Dirichlet", D, 0.5), ("Robin", R1, 0.1)):
            sel = select_radii(math.pi, bc, delta)
            r = sel.radii
            # independent solves of the three eigenvalues
            lam1 = (oracles.J01 / r.r1) ** 2
            lam2 = (oracles.J11 / r.r1) ** 2
            if bc.is_dirichlet:
                mu = oracles.annulus_dirichlet_k(r.r2, r.r3) ** 2
            else:
                mu = oracles.annulus_robin_k(r.r2, r.r3, 1.0) ** 2
            area = math.pi * (r.r1**2 + r.r3**2 - r.r2**2)
            gap = abs((lam2 - mu) - (mu - lam1)) / mu
            ok &= abs(area - math.pi) <= 1e-8 * math.pi and lam1 < mu < lam2 and gap <= 1e-6
            ok &= abs(mu - sel.mu1_annulus) <= 1e-8 * mu
            details.append(f"{name} area res {abs(area - math.pi):.1e} gap res {gap:.1e}")
        small = select_radii(math.pi, D, 0.5).radii
        big = select_radii(4 * math.pi, D, 0.5).radii
        scale = max(abs(getattr(big, k) - 2 * getattr(small, k)) for k in ("r1", "r2", "r3"))
        ok &= scale <= 1e-8
    ok &= t.seconds < 10
    assert report("4", ok, "; ".join(details) + f"; scaling {scale:.1e}; {t.seconds:.1f} s")


# 5 ------------------------------------------------------------------------


@pytest.mark.xfail(strict=True, reason="the perturbed core has not reached its Dirichlet limit by n = 16")
def test_5_core_ordering():
    c = SweepConfig().resolved()
    sel = select_radii(c.M, c.bc, c.radii_delta)
    lam1 = (oracles.J01 / sel.radii.r1) ** 2
    rows, ordered = [], True
    for n in c.n_schedule:
        m1, m2 = ex.core_spectrum(sel.radii, n, c.bc, c.h, "perturbed", c.points_per_wave, c.seed)
        ordered &= m1 < sel.mu1_annulus < m2
        rows.append(f"n={n}: {m1:.3f} < {sel.mu1_annulus:.3f} < {m2:.3f} {'ok' if m1 < sel.mu1_annulus < m2 else 'no'}")
    off = abs(m1 - lam1) / lam1
    ok = ordered and off <= 0.02
    report("5", ok, "; ".join(rows) + f"; |mu1(U_16) - lambda1(B_R1)| / lambda1 = {off:.3f} (tol 0.02)")
    assert ok


# 6 ------------------------------------------------------------------------


def test_6_sweeps_pass(sweeps):
    total = sum(r.seconds for r in sweeps.values())
    parts = []
    for name, res in sweeps.items():
        ch = res.checks
        parts.append(
            f"{name} {res.verdict} (n={[r.n for r in res.records]}, interior {ch['final_interior']}, "
            f"domains 2 {ch['final_two_domains']}, simple {ch['final_simple']}, localized {ch['localized_last_two']})"
        )
    ok = all(r.verdict == ex.PASS for r in sweeps.values()) and total < 1800
    assert report("6", ok, "; ".join(parts) + f"; {total:.0f} s")


# 7 ------------------------------------------------------------------------


def _halved(checks, what):
    first, last = checks[f"{what}_gap_first"], checks[f"{what}_gap_last"]
    return last < 0.5 * first, f"|{what} - R0| {first:.4f} -> {last:.4f}"


@pytest.mark.parametrize("variant", ["dirichlet", "robin"])
def test_7_radius_trend(sweeps, variant):
    ok, detail = _halved(sweeps[variant].checks, "R")
    assert report(f"7.{variant}.R", ok, f"{variant} {detail}")


def test_7_rho_trend_dirichlet(sweeps):
    ok, detail = _halved(sweeps["dirichlet"].checks, "rho")
    assert report("7.dirichlet.rho", ok, f"dirichlet {detail}")


@pytest.mark.xfail(strict=True, reason="rho already sits within 2h of R0 at n = 12; the mesh floor stops it halving")
def test_7_rho_trend_robin(sweeps):
    ok, detail = _halved(sweeps["robin"].checks, "rho")
    report("7.robin.rho", ok, f"robin {detail}")
    assert ok


# 8 ------------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["dirichlet", "robin"])
def test_8_nodal_length_bounded(sweeps, variant):
    res = sweeps[variant]
    ch = res.checks
    h = res.config.h
    slack = max(r.sigma_lower_bound - r.sigma_in_disk for r in res.records)
    ok = ch["sigma_ratio"] <= 2 and ch["sandwich_ok"]
    sig = ", ".join(f"{r.sigma_in_disk:.3f}" for r in res.records)
    assert report(
        f"8.{variant}", ok, f"{variant} sigma {sig}, max/min {ch['sigma_ratio']:.3f} (tol 2), lower bound minus sigma {slack:.3f} (h={h})"
    )


# 9 ------------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["dirichlet", "robin"])
def test_9_kappa(sweeps, variant):
    ch = sweeps[variant].checks
    ok = ch["kappa_min"] > ex.KAPPA_FLOOR
    assert report(f"9.{variant}", ok, f"{variant} min kappa {ch['kappa_min']:.4f} (floor {ex.KAPPA_FLOOR})")


# 10 -----------------------------------------------------------------------


def test_10_neumann_end(robin_beta):
    last, table, seconds = robin_beta
    zero = table.rows[0]
    ok = zero.beta == 0 and not zero.interior_verdict and zero.mu2 < zero.lambda1 and table.mechanism_ok and seconds < 900
    assert report(
        "10.neumann",
        ok,
        f"domain n={last.n} eps={last.eps:.4g}: beta=0 verdict {zero.interior_verdict}, mu2 {zero.mu2:.4f} < lambda1 {zero.lambda1:.4f}, "
        f"mechanism {table.mechanism_ok}, continuity error {table.continuity_error:.1e}, {seconds:.0f} s",
    )


def test_10_pass_beta_is_interior(robin_beta):
    _, table, _ = robin_beta
    row = next(r for r in table.rows if r.beta == 1.0)
    assert report("10.pass_beta", row.interior_verdict, f"beta=1 verdict {row.interior_verdict}, mu2 {row.mu2:.4f}")


@pytest.mark.xfail(strict=True, reason="large beta lifts the annulus above the core's angular pair and the nodal line returns to the boundary")
def test_10_false_then_true(robin_beta):
    _, table, _ = robin_beta
    seq = " ".join(f"{r.beta:g}:{'T' if r.interior_verdict else 'F'}" for r in table.rows)
    report(
        "10.monotone",
        table.monotone,
        f"verdicts {seq}; transition beta {table.transition_beta:g}; "
        f"{'monotone' if table.monotone else 'non-monotone, counterexample candidate'}",
    )
    assert table.monotone


# 11 -----------------------------------------------------------------------


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "nodal_lab.cli", *map(str, args)], capture_output=True, check=True, text=True).stdout


def test_11_determinism(tmp_path):
    cfg = tmp_path / "d.toml"
    cfg.write_text('seed = 5\n[domain]\nvariant = "dirichlet"\n[solve]\nn = 8\neps = 0.1\n')
    same = []
    for cmd in (
        ["radii", "--variant", "robin", "--delta", "0.1"],
        ["spectrum", "--domain", "annulus", "--inner", "0.5", "--outer", "1", "--variant", "robin", "--count", "5"],
        ["solve", "--config", cfg],
        ["beta-sweep", "--config", cfg, "--grid", "0,1,10"],
        ["sweep", "--config", cfg],
    ):
        outs = []
        for k in range(2):
            if cmd[0] in ("sweep", "beta-sweep"):
                d = tmp_path / f"{cmd[0]}{k}"
                _cli(*cmd, "--out", d)
                outs.append(b"".join(p.read_bytes() for p in sorted(d.glob("*.csv")) if p.name != "timings.csv"))
            else:
                outs.append(_cli(*cmd).encode())
        same.append((cmd[0], outs[0] == outs[1] and len(outs[0]) > 0))
    ok = all(s for _, s in same)
    assert report("11", ok, "byte-identical CSV: " + ", ".join(f"{c} {s}" for c, s in same))
