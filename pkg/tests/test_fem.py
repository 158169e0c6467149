import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from nodal_lab import fem
from nodal_lab import geometry as geo
from nodal_lab import mesh as meshing
from nodal_lab.spectra import BoundaryCondition, select_radii

D = BoundaryCondition.dirichlet()
N = BoundaryCondition.neumann()
R1 = BoundaryCondition.robin(1.0)


@pytest.fixture(scope="module")
def square_mesh():
    return meshing.triangulate(geo.Polygon.rectangle(0.0, 0.0, math.pi, math.pi), 0.05)


@pytest.fixture(scope="module")
def test_domains(disk_mesh, square_mesh):
    sel = select_radii(math.pi, R1, 0.1)
    comp = meshing.triangulate(geo.Composite(sel.radii, 12, 0.02), 0.06)
    ann = meshing.triangulate(geo.Annulus(0.5, 1.0), 0.05)
    dsel = select_radii(math.pi, D, 0.5)
    comp_disk = meshing.triangulate(geo.Composite(dsel.radii, 12, 0.05, core="disk"), 0.05)
    return {"disk": disk_mesh, "square": square_mesh, "annulus": ann, "composite": comp, "composite_disk": comp_disk}


def reference_triangle():
    return meshing.Mesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]), ["outer-boundary"] * 3
    )


def test_reference_triangle_matrices():
    K, M, B = fem.assemble(reference_triangle())
    np.testing.assert_allclose(K.toarray(), 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-15)
    np.testing.assert_allclose(M.toarray(), np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0, atol=1e-15)
    assert abs(B.sum() - (2 + math.sqrt(2))) < 1e-14


def test_degenerate_triangle_rejected():
    m = meshing.Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1, 2]]), np.array([[0, 1]]), ["x"])
    with pytest.raises(fem.DegenerateElementError) as info:
        fem.assemble(m)
    assert info.value.element == 0


@pytest.mark.parametrize("name", ["disk", "square", "annulus", "composite", "composite_disk"])
def test_partition_of_unity(test_domains, name):
    m = test_domains[name]
    K, M, B = fem.assemble(m)
    c = np.ones(m.n_vertices)
    assert np.abs(K @ c).max() < 1e-10
    assert abs(c @ (M @ c) - m.area()) <= 1e-12 * max(1.0, m.area())
    assert abs(c @ (B @ c) - m.boundary_length()) <= 1e-12 * max(1.0, m.boundary_length())
    for A in (K, M, B):
        assert abs(A - A.T).max() == 0.0


def test_square_dirichlet_spectrum(square_mesh):
    sol = fem.solve_mesh(square_mesh, D, count=4)
    np.testing.assert_allclose(sol.eigenvalues, [2, 5, 5, 8], rtol=0.01)
    g12, g23 = fem.eigen_gap(sol)
    assert abs(g12 - 3) < 0.05 and abs(g23) < 0.05


def test_disk_dirichlet_and_robin(disk_mesh):
    lam = fem.solve_mesh(disk_mesh, D, count=3)
    assert abs(lam.eigenvalues[0] - 5.783185962946785) / 5.783185962946785 < 0.01
    assert abs(fem.eigen_gap(lam)[1]) < 1e-3 * lam.eigenvalues[1]
    mu = fem.solve_mesh(disk_mesh, R1, count=1)
    want = oracles.ROBIN_DISK_K**2
    assert abs(mu.eigenvalues[0] - want) / want < 0.01


def _rates(bc, exact, levels=4):
    m = meshing.triangulate(geo.Disk(1.0), 0.2)
    errs = []
    for i in range(levels):
        errs.append(fem.solve_mesh(m, bc, count=1).eigenvalues[0] - exact)
        if i < levels - 1:
            m = meshing.refine(m)
    return errs, [math.log2(abs(a / b)) for a, b in zip(errs, errs[1:])]


def test_convergence_order_dirichlet():
    errs, rates = _rates(D, oracles.J01**2)
    assert all(e > 0 for e in errs)  # from above
    assert all(1.7 <= r <= 2.3 for r in rates), rates


def test_convergence_order_robin():
    errs, rates = _rates(R1, oracles.ROBIN_DISK_K**2)
    assert all(1.7 <= r <= 2.3 for r in rates), rates


# Dirichlet data goes with the disk core, as in the sweeps; the wave fingers of
# U_n hold noise-level Dirichlet values
@pytest.mark.parametrize(
    "name,bc",
    [(d, bc) for d in ("disk", "square", "annulus") for bc in (D, R1)] + [("composite", R1), ("composite_disk", D)],
)
def test_solution_invariants(test_domains, name, bc):
    m = test_domains[name]
    K, M, B = fem.assemble(m)
    sol = fem.solve_eigs(K, M, B, bc, 3, boundary_mask=m.boundary_mask)
    assert np.all(np.diff(sol.eigenvalues) >= 0)
    assert sol.orthogonality_error < 1e-8
    assert np.all(sol.residuals <= fem.DEFAULT_TOL * np.maximum(1.0, sol.eigenvalues))
    for j in range(3):
        q = fem.rayleigh_quotient(K, M, B, bc, sol.vector(j))
        assert abs(q - sol.eigenvalues[j]) <= 1e-10 * sol.eigenvalues[j]
    psi1 = sol.vector(0)
    inner = psi1 if not bc.is_dirichlet else psi1[~m.boundary_mask]
    assert inner.min() > 0


@pytest.mark.parametrize("name", ["disk", "square", "annulus", "composite", "composite_disk"])
def test_neumann_filonov_faber_krahn(test_domains, name):
    m = test_domains[name]
    K, M, B = fem.assemble(m)
    neu = fem.solve_eigs(K, M, B, N, 3)
    assert abs(neu.eigenvalues[0]) < 1e-9
    psi = neu.vector(0)
    assert np.ptp(psi) < 1e-8 * np.abs(psi).max()
    lam1 = fem.solve_eigs(K, M, B, D, 1, boundary_mask=m.boundary_mask).eigenvalues[0]
    assert neu.eigenvalues[1] < lam1
    ball = oracles.J01**2 * math.pi / m.area()
    assert lam1 >= ball * (1 - 0.01)


def test_composite_simple_second_eigenvalue():
    sel = select_radii(math.pi, D, 0.5)
    spec = geo.Composite(sel.radii, 8, 0.10492, core="disk")
    sol = fem.solve_mesh(meshing.triangulate(spec, 0.05), D, count=3)
    g12, g23 = fem.eigen_gap(sol)
    assert g12 > 0 and g23 > 0.01 * sol.eigenvalues[1]


def test_seed_determinism(disk_mesh):
    a = fem.solve_mesh(disk_mesh, R1, count=3, seed=7)
    b = fem.solve_mesh(disk_mesh, R1, count=3, seed=7)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_solver_argument_errors(disk_mesh):
    K, M, B = fem.assemble(disk_mesh)
    with pytest.raises(ValueError):
        fem.solve_eigs(K, M, B, R1, 11)
    with pytest.raises(ValueError):
        fem.solve_eigs(K, M, B, D, 3)  # no boundary mask
    with pytest.raises(ValueError):
        fem.eigen_gap(fem.solve_eigs(K, M, B, R1, 2))


def test_evaluate_exact_at_vertices(disk_mesh):
    vals = np.sin(3 * disk_mesh.vertices[:, 0]) + disk_mesh.vertices[:, 1]
    for i in (0, 17, disk_mesh.n_vertices - 1):
        assert fem.evaluate(vals, disk_mesh, disk_mesh.vertices[i]) == pytest.approx(vals[i], abs=1e-14)


@given(r=st.floats(0.0, 0.99), th=st.floats(-math.pi, math.pi), a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_evaluate_reproduces_linear_fields(disk_mesh, r, th, a, b, c):
    p = np.array([r * math.cos(th), r * math.sin(th)])
    v = disk_mesh.vertices
    field = a * v[:, 0] + b * v[:, 1] + c
    assert fem.evaluate(field, disk_mesh, p) == pytest.approx(a * p[0] + b * p[1] + c, abs=1e-11)
    assert fem.evaluate(np.full(len(v), 2.5), disk_mesh, p) == pytest.approx(2.5, abs=1e-14)


def test_evaluate_outside(disk_mesh):
    with pytest.raises(fem.PointOutsideError):
        fem.evaluate(np.zeros(disk_mesh.n_vertices), disk_mesh, (1.5, 0.0))
