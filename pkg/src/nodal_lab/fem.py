"""Piecewise-linear finite elements for the Laplacian with Robin or Dirichlet data.

The weak form of ``-Δu = μu``, ``∂u/∂ν + βu = 0`` is
``∫∇u·∇v + β∫_∂Ω uv = μ∫uv``, so the pencil is ``(K + βB, M)`` with ``K`` the
stiffness, ``M`` the consistent mass and ``B`` the boundary-edge mass.
Dirichlet problems drop the boundary unknowns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu
from scipy.spatial import cKDTree

from .mesh import Mesh
from .spectra import BoundaryCondition

try:  # CHOLMOD is optional; SuperLU is always available
    from sksparse.cholmod import cholesky as _cholmod
except ImportError:  # pragma: no cover - depends on the environment
    _cholmod = None

DEFAULT_TOL = 1e-9
MAX_COUNT = 10
ORTHO_TOL = 1e-8

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS_REF = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


class DegenerateElementError(ValueError):
    def __init__(self, element: int, area: float):
        super().__init__(f"triangle {element} is degenerate (signed area {area:.3e})")
        self.element = element


class FactorizationError(RuntimeError):
    pass


class EigenNonConvergence(RuntimeError):
    def __init__(self, msg: str, residuals):
        super().__init__(f"{msg}; residuals {np.array2string(np.asarray(residuals), precision=3)}")
        self.residuals = np.asarray(residuals)


class PointOutsideError(ValueError):
    pass


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients per triangle (T×3×2) and signed areas."""
    p = mesh.vertices[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = np.abs(det).max(initial=0.0)
    bad = np.flatnonzero(np.abs(det) <= 1e-14 * max(scale, 1e-300))
    if len(bad):
        raise DegenerateElementError(int(bad[0]), 0.5 * float(det[bad[0]]))
    # rows of inv(J)^T give the gradients of lambda_1 and lambda_2
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return grads, 0.5 * det


def _scatter(rows_idx: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    k = rows_idx.shape[1]
    rows = np.repeat(rows_idx, k, axis=1).ravel()
    cols = np.tile(rows_idx, (1, k)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def assemble(mesh: Mesh) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Stiffness ``K``, mass ``M`` and boundary mass ``B`` of P1 elements."""
    n = mesh.n_vertices
    grads, area = _gradients(mesh)
    if np.any(area < 0):
        bad = int(np.flatnonzero(area < 0)[0])
        raise DegenerateElementError(bad, float(area[bad]))
    k_loc = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    m_loc = area[:, None, None] * _MASS_REF[None]
    K = _scatter(mesh.triangles, k_loc, n)
    M = _scatter(mesh.triangles, m_loc, n)
    be = mesh.boundary_edges
    length = np.linalg.norm(mesh.vertices[be[:, 1]] - mesh.vertices[be[:, 0]], axis=1)
    B = _scatter(be, length[:, None, None] * _EDGE_MASS_REF[None], n)
    # exact symmetry: the scatter is symmetric up to summation order
    K = ((K + K.T) * 0.5).tocsr()
    M = ((M + M.T) * 0.5).tocsr()
    B = ((B + B.T) * 0.5).tocsr()
    return K, M, B


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # vertices × count, M-orthonormal
    residuals: np.ndarray
    bc: BoundaryCondition
    orthogonality_error: float = 0.0
    backend: str = ""
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def vector(self, j: int) -> np.ndarray:
        """Eigenvector ``j`` (0-based) as a vertex field."""
        return self.eigenvectors[:, j]


def _factorize(A: sp.spmatrix):
    """Solver for ``A x = b`` with ``A`` symmetric positive definite."""
    A = sp.csc_matrix(A)
    if _cholmod is not None:
        try:
            f = _cholmod(A, ordering_method="amd")
            return f, "cholmod"
        except Exception as exc:  # CHOLMOD reports non-SPD input as an error
            raise FactorizationError(f"Cholesky factorization failed: {exc}") from exc
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise FactorizationError(f"LU factorization failed: {exc}") from exc
    return lu.solve, "superlu"


def _shift(bc: BoundaryCondition) -> float:
    # the Neumann pencil is singular at zero
    return -1.0 if bc.is_neumann else 0.0


def _normalize_signs(vecs: np.ndarray) -> np.ndarray:
    """Fix the sign so the entry of largest magnitude is positive (first on ties)."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def solve_eigs(
    K: sp.spmatrix,
    M: sp.spmatrix,
    B: sp.spmatrix,
    bc: BoundaryCondition,
    count: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    boundary_mask: np.ndarray | None = None,
    max_iter: int | None = None,
) -> EigenSolution:
    """Lowest ``count`` eigenpairs of ``(K + βB) ψ = μ M ψ``.

    Dirichlet problems need ``boundary_mask`` (the mesh's boundary vertices);
    those unknowns are eliminated and the returned vectors are zero there.
    Convergence means ``‖Aψ − μMψ‖/‖Mψ‖ ≤ tol·max(1, μ)``.
    """
    if not 1 <= count <= MAX_COUNT:
        raise ValueError(f"count must be in 1..{MAX_COUNT}, got {count}")
    t0 = time.perf_counter()
    n_all = K.shape[0]
    if bc.is_dirichlet:
        if boundary_mask is None:
            raise ValueError("Dirichlet solve needs the boundary vertex mask")
        free = np.flatnonzero(~np.asarray(boundary_mask, dtype=bool))
        A = K[free][:, free]
        Mf = M[free][:, free]
    else:
        free = np.arange(n_all)
        A = K + bc.beta * B if bc.beta else K.copy()
        Mf = M
    A = sp.csr_matrix(A)
    Mf = sp.csr_matrix(Mf)
    n = A.shape[0]
    if count >= n:
        raise ValueError(f"only {n} unknowns, cannot compute {count} eigenpairs")

    sigma = _shift(bc)
    solve, backend = _factorize(A - sigma * Mf)
    op = LinearOperator((n, n), matvec=solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ncv = min(n, max(2 * count + 1, 20))
    arpack_tol = min(tol * 1e-3, 1e-12)

    vals = vecs = None
    res = None
    for attempt in range(3):
        vals, vecs = eigsh(
            A, k=count, M=Mf, sigma=sigma, which="LM", OPinv=op, v0=v0, ncv=ncv, tol=arpack_tol, maxiter=max_iter
        )
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        res = _residuals(A, Mf, vals, vecs)
        if np.all(res <= tol * np.maximum(1.0, np.abs(vals))):
            break
        arpack_tol *= 1e-2
        ncv = min(n, 2 * ncv)
    else:
        raise EigenNonConvergence("eigensolver missed the residual tolerance", res)

    # M-orthonormalize within the computed block (exact invariant subspace up to tol)
    gram = vecs.T @ (Mf @ vecs)
    L = np.linalg.cholesky(gram)
    vecs = np.linalg.solve(L, vecs.T).T
    vecs = _normalize_signs(vecs)
    gram = vecs.T @ (Mf @ vecs)
    ortho = float(np.abs(gram - np.eye(count)).max())

    full = np.zeros((n_all, count))
    full[free] = vecs
    res = _residuals(A, Mf, vals, vecs)
    return EigenSolution(
        eigenvalues=vals,
        eigenvectors=full,
        residuals=res,
        bc=bc,
        orthogonality_error=ortho,
        backend=backend,
        seconds=time.perf_counter() - t0,
        info={"unknowns": n, "shift": sigma},
    )


def _residuals(A, M, vals, vecs) -> np.ndarray:
    Mv = M @ vecs
    r = A @ vecs - Mv * vals[None, :]
    return np.linalg.norm(r, axis=0) / np.linalg.norm(Mv, axis=0)


def solve_mesh(mesh: Mesh, bc: BoundaryCondition, count: int = 3, tol: float = DEFAULT_TOL, seed: int = 0):
    """Assemble and solve on ``mesh``; convenience wrapper."""
    K, M, B = assemble(mesh)
    return solve_eigs(K, M, B, bc, count, tol=tol, seed=seed, boundary_mask=mesh.boundary_mask)


def rayleigh_quotient(K, M, B, bc: BoundaryCondition, psi: np.ndarray) -> float:
    A = K if bc.is_dirichlet or not bc.beta else K + bc.beta * B
    return float(psi @ (A @ psi)) / float(psi @ (M @ psi))


def eigen_gap(sol: EigenSolution) -> tuple[float, float]:
    """``(μ₂ − μ₁, μ₃ − μ₂)``."""
    if sol.count < 3:
        raise ValueError("eigen_gap needs at least three eigenvalues")
    mu = sol.eigenvalues
    return float(mu[1] - mu[0]), float(mu[2] - mu[1])


# ---------------------------------------------------------------------------
# point evaluation
# ---------------------------------------------------------------------------


class Locator:
    """Triangle lookup for batches of points (nearest-centroid candidates)."""

    def __init__(self, mesh: Mesh, candidates: int = 12):
        self.mesh = mesh
        self.candidates = min(candidates, mesh.n_triangles)
        cen = mesh.centroids()
        self._tree = cKDTree(cen)
        p = mesh.vertices[mesh.triangles]
        # a point inside triangle t lies within this distance of t's centroid
        self._reach = float(np.linalg.norm(p - cen[:, None, :], axis=2).max())
        self._origin = p[:, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        # inverse Jacobian rows, mapping (x - p0) to (lambda_1, lambda_2)
        self._inv = np.stack(
            [np.column_stack([e2[:, 1], -e2[:, 0]]), np.column_stack([-e1[:, 1], e1[:, 0]])], axis=1
        ) / det[:, None, None]

    def _bary(self, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
        d = pts - self._origin[tri]
        l12 = np.einsum("tij,tj->ti", self._inv[tri], d)
        return np.column_stack([1.0 - l12.sum(axis=1), l12])

    def locate(self, pts, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle (−1 if none) and barycentric coordinates per point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tri = -np.ones(len(pts), dtype=np.int64)
        bary = np.zeros((len(pts), 3))
        dist, cand = self._tree.query(pts, k=self.candidates)
        cand = cand.reshape(len(pts), -1)
        near = dist.reshape(len(pts), -1)[:, 0] <= self._reach
        for j in range(cand.shape[1]):
            b = self._bary(cand[:, j], pts)
            hit = (tri < 0) & (b.min(axis=1) >= -tol)
            tri[hit] = cand[hit, j]
            bary[hit] = b[hit]
        # the containing triangle, if any, has its centroid within reach
        missing = np.flatnonzero((tri < 0) & near)
        if len(missing):
            balls = self._tree.query_ball_point(pts[missing], r=self._reach * (1 + 1e-9))
            for i, ball in zip(missing, balls):
                ball = np.asarray(ball, dtype=np.int64)
                b = self._bary(ball, np.broadcast_to(pts[i], (len(ball), 2)))
                k = int(np.argmax(b.min(axis=1)))
                if b[k].min() >= -tol:
                    tri[i], bary[i] = ball[k], b[k]
        return tri, bary

    def evaluate(self, values: np.ndarray, pts, strict: bool = True) -> np.ndarray:
        tri, bary = self.locate(pts)
        if strict and np.any(tri < 0):
            bad = np.atleast_2d(np.asarray(pts, dtype=float))[np.flatnonzero(tri < 0)[0]]
            raise PointOutsideError(f"point ({bad[0]:.6g}, {bad[1]:.6g}) is outside the mesh")
        out = np.einsum("ti,ti->t", np.asarray(values)[self.mesh.triangles[np.maximum(tri, 0)]], bary)
        out[tri < 0] = np.nan
        return out


def evaluate(values: np.ndarray, mesh: Mesh, p) -> float:
    """Piecewise-linear interpolant of a vertex field at one point."""
    return float(Locator(mesh).evaluate(values, np.asarray(p, dtype=float).reshape(1, 2))[0])
