"""Nodal sets of P1 eigenfunctions and the diagnostics built on them.

Sign convention: fields are flipped so the vertex nearest the origin is
negative ("negative inside"); the nodal domain that meets the boundary, if any,
is then the positive one for the fields we care about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import geometry as geo
from .fem import Locator
from .mesh import Mesh
from .spectra import RadiiTriple, radius_from_eigenvalue

ZERO_NUDGE = 1e-14
SYMMETRY_SAMPLES = 10_000


class EmptyNodalSetError(ValueError):
    pass


class NoNegativePartError(ValueError):
    pass


class DomainContainmentError(ValueError):
    pass


@dataclass
class NodalSet:
    segments: np.ndarray  # S×2×2
    length: float
    radial_interval: tuple[float, float]
    touches_boundary: bool
    nodal_domain_count: int
    sign_convention: str = "negative-inside"
    radially_connected: bool = True
    zeros_perturbed: int = 0
    flipped: bool = False

    @property
    def empty(self) -> bool:
        return len(self.segments) == 0


@dataclass
class NodalReport:
    nodal: NodalSet
    R_nodal_ball: float
    rho: float
    sigma_in_disk: float
    kappa: float
    mass_minus_in_A: float
    l2_mass_minus_in_B_R1: float
    symmetry_defect: float
    interior_verdict: bool
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# sign handling
# ---------------------------------------------------------------------------


def sign_normalize(mesh: Mesh, psi: np.ndarray) -> tuple[np.ndarray, bool]:
    """Flip ``psi`` so the vertex nearest the origin is negative.

    If that vertex is (numerically) zero, the nearest vertex with a nonzero
    value decides.
    """
    psi = np.asarray(psi, dtype=float)
    order = np.argsort(np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]), kind="stable")
    scale = np.abs(psi).max(initial=0.0)
    for i in order:
        if abs(psi[i]) > 1e-12 * scale:
            return (-psi, True) if psi[i] > 0 else (psi.copy(), False)
    return psi.copy(), False


def _nudge_zeros(psi: np.ndarray) -> tuple[np.ndarray, int]:
    zero = psi == 0.0
    if not zero.any():
        return psi, 0
    out = psi.copy()
    out[zero] = ZERO_NUDGE * np.abs(psi).max(initial=1.0)
    return out, int(zero.sum())


def _extend_boundary(mesh: Mesh, psi: np.ndarray) -> np.ndarray:
    """Replace the boundary zeros of a Dirichlet field by the mean of interior neighbours.

    Nudging them to a tiny positive value would put a spurious chord along
    the whole boundary next to every negative region.
    """
    uniq, _ = mesh.edges()
    b = mesh.boundary_mask
    out = psi.copy()
    both = np.concatenate([uniq, uniq[:, ::-1]])
    sel = b[both[:, 1]] & ~b[both[:, 0]]
    tot = np.bincount(both[sel, 1], weights=psi[both[sel, 0]], minlength=len(psi))
    cnt = np.bincount(both[sel, 1], minlength=len(psi))
    has = b & (cnt > 0)
    out[has] = tot[has] / cnt[has]
    return out


def _is_dirichlet_field(mesh: Mesh, psi: np.ndarray) -> bool:
    return bool(len(mesh.boundary_vertices)) and bool(np.all(psi[mesh.boundary_vertices] == 0.0))


def boundary_adjacent_vertices(mesh: Mesh, dirichlet: bool) -> np.ndarray:
    """Vertices whose sign decides boundary contact.

    With Robin data these are the boundary vertices.  A Dirichlet field
    vanishes there, so the first interior ring is used instead.
    """
    if not dirichlet:
        return mesh.boundary_vertices
    uniq, _ = mesh.edges()
    b = mesh.boundary_mask
    ring = np.concatenate([uniq[b[uniq[:, 0]] & ~b[uniq[:, 1]], 1], uniq[b[uniq[:, 1]] & ~b[uniq[:, 0]], 0]])
    return np.unique(ring)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def _crossings(vertices: np.ndarray, triangles: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Zero-level chords of the linear interpolant, one per mixed-sign triangle."""
    pos = psi[triangles] > 0
    mixed = np.flatnonzero(pos.any(axis=1) & ~pos.all(axis=1))
    if len(mixed) == 0:
        return np.zeros((0, 2, 2))
    tri = triangles[mixed]
    val = psi[tri]
    pts = vertices[tri]
    sgn = pos[mixed]
    # the odd vertex is the one whose sign differs from the other two
    odd = np.where(sgn.sum(axis=1) == 1, np.argmax(sgn, axis=1), np.argmin(sgn, axis=1))
    rows = np.arange(len(mixed))
    a = odd
    out = np.empty((len(mixed), 2, 2))
    for k, step in enumerate((1, 2)):
        b = (a + step) % 3
        va, vb = val[rows, a], val[rows, b]
        t = va / (va - vb)
        out[:, k] = pts[rows, a] + t[:, None] * (pts[rows, b] - pts[rows, a])
    return out


def _segment_radial_range(seg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p, q = seg[:, 0], seg[:, 1]
    rp, rq = np.hypot(*p.T), np.hypot(*q.T)
    d = q - p
    dd = (d * d).sum(axis=1)
    t = np.clip(-(p * d).sum(axis=1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    foot = p + t[:, None] * d
    return np.minimum(np.hypot(*foot.T), np.minimum(rp, rq)), np.maximum(rp, rq)


def _radially_connected(seg: np.ndarray, resolution: float) -> bool:
    lo, hi = _segment_radial_range(seg)
    order = np.argsort(lo)
    reach = hi[order[0]]
    for i in order[1:]:
        if lo[i] > reach + resolution:
            return False
        reach = max(reach, hi[i])
    return True


def _domain_count(mesh: Mesh, positive: np.ndarray) -> int:
    """Nodal domains of the interpolant: same-sign vertices joined by mesh edges."""
    uniq, _ = mesh.edges()
    same = positive[uniq[:, 0]] == positive[uniq[:, 1]]
    e = uniq[same]
    n = mesh.n_vertices
    graph = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def _mesh_resolution(mesh: Mesh) -> float:
    if math.isfinite(mesh.h_target):
        return float(mesh.h_target)
    uniq, _ = mesh.edges()
    return float(np.linalg.norm(mesh.vertices[uniq[:, 1]] - mesh.vertices[uniq[:, 0]], axis=1).max())


def extract_nodal_set(mesh: Mesh, psi: np.ndarray, dirichlet: bool | None = None) -> NodalSet:
    """Zero set of the piecewise-linear interpolant of ``psi``.

    An all-one-sign field gives an empty set (``empty`` is true).  ``dirichlet``
    defaults to "all boundary values are exactly zero".
    """
    psi = np.asarray(psi, dtype=float)
    if dirichlet is None:
        dirichlet = _is_dirichlet_field(mesh, psi)
    psi, flipped = sign_normalize(mesh, psi)
    if dirichlet:
        psi = _extend_boundary(mesh, psi)
    psi, nudged = _nudge_zeros(psi)
    seg = _crossings(mesh.vertices, mesh.triangles, psi)
    positive = psi > 0
    watch = boundary_adjacent_vertices(mesh, dirichlet)
    touches = bool(np.any(~positive[watch])) if len(watch) else False
    count = _domain_count(mesh, positive)
    if len(seg) == 0:
        return NodalSet(seg, 0.0, (math.nan, math.nan), touches, count, zeros_perturbed=nudged, flipped=flipped)
    length = float(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1).sum())
    lo, hi = _segment_radial_range(seg)
    return NodalSet(
        segments=seg,
        length=length,
        radial_interval=(float(lo.min()), float(hi.max())),
        touches_boundary=touches,
        nodal_domain_count=count,
        radially_connected=_radially_connected(seg, _mesh_resolution(mesh)),
        zeros_perturbed=nudged,
        flipped=flipped,
    )


def radial_interval(nodal: NodalSet, resolution: float | None = None) -> tuple[float, float, bool]:
    """``(r_min, r_max, radially_connected)`` of the radii the nodal set attains."""
    if nodal.empty:
        raise EmptyNodalSetError("the nodal set is empty")
    if resolution is None:
        return nodal.radial_interval[0], nodal.radial_interval[1], nodal.radially_connected
    return nodal.radial_interval[0], nodal.radial_interval[1], _radially_connected(nodal.segments, resolution)


def nodal_ball_radius(mu2: float) -> float:
    """Radius of the disk whose first Dirichlet eigenvalue is ``mu2``."""
    return radius_from_eigenvalue(mu2)


# ---------------------------------------------------------------------------
# lengths
# ---------------------------------------------------------------------------


def _clip_to_disk(seg: np.ndarray, radius: float) -> np.ndarray:
    """Length of each segment inside the closed disk of ``radius``."""
    p = seg[:, 0]
    d = seg[:, 1] - seg[:, 0]
    a = (d * d).sum(axis=1)
    b = 2.0 * (p * d).sum(axis=1)
    c = (p * p).sum(axis=1) - radius * radius
    disc = b * b - 4 * a * c
    out = np.zeros(len(seg))
    ok = (disc > 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.clip((-b - sq) / np.where(ok, 2 * a, 1.0), 0.0, 1.0)
    t1 = np.clip((-b + sq) / np.where(ok, 2 * a, 1.0), 0.0, 1.0)
    out[ok] = (t1 - t0)[ok] * np.sqrt(a[ok])
    return out


def sigma_in_disk(nodal: NodalSet, radius: float) -> float:
    """Length of the nodal set inside ``B_radius`` (segments clipped exactly)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if nodal.empty:
        return 0.0
    return float(_clip_to_disk(nodal.segments, radius).sum())


def sigma_in_half_plane(nodal: NodalSet) -> float:
    """Length of the nodal set in ``{x ≥ 0}``, i.e. angles in [−π/2, π/2)."""
    if nodal.empty:
        return 0.0
    p, q = nodal.segments[:, 0], nodal.segments[:, 1]
    L = np.linalg.norm(q - p, axis=1)
    xp, xq = p[:, 0], q[:, 0]
    frac = np.where(
        (xp >= 0) & (xq >= 0),
        1.0,
        np.where((xp < 0) & (xq < 0), 0.0, np.maximum(xp, xq) / np.where(xp != xq, np.abs(xp - xq), 1.0)),
    )
    return float((L * frac).sum())


# ---------------------------------------------------------------------------
# field diagnostics
# ---------------------------------------------------------------------------


def _disk_inside_domain(mesh: Mesh, radius: float) -> bool:
    th = np.linspace(0.0, geo.TWO_PI, 720, endpoint=False)
    x, y = radius * np.cos(th), radius * np.sin(th)
    if mesh.spec is not None:
        return bool(np.all(geo.contains_xy(mesh.spec, x, y)))
    tri, _ = Locator(mesh).locate(np.column_stack([x, y]))
    return bool(np.all(tri >= 0))


def _sup_in_disk(mesh: Mesh, psi: np.ndarray, radius: float) -> float:
    v = mesh.vertices
    inside = np.hypot(v[:, 0], v[:, 1]) < radius
    best = np.abs(psi[inside]).max(initial=0.0)
    uniq, _ = mesh.edges()
    mid = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
    mid_in = np.hypot(mid[:, 0], mid[:, 1]) < radius
    if mid_in.any():
        vals = 0.5 * (psi[uniq[mid_in, 0]] + psi[uniq[mid_in, 1]])
        best = max(best, float(np.abs(vals).max()))
    return float(best)


def kappa(mesh: Mesh, psi: np.ndarray, r_inner: float, r_outer: float) -> float:
    """``sup|ψ|`` over ``B_{r_inner}`` divided by ``sup|ψ|`` over ``B_{r_outer}``.

    Returns NaN when the outer supremum vanishes (0/0).
    """
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    if not _disk_inside_domain(mesh, r_outer):
        raise DomainContainmentError(f"B({r_outer:g}) is not contained in the domain")
    psi = np.asarray(psi, dtype=float)
    den = _sup_in_disk(mesh, psi, r_outer)
    if den == 0.0:
        return math.nan
    return _sup_in_disk(mesh, psi, r_inner) / den


def _negative_pieces(mesh: Mesh, psi: np.ndarray):
    """Sub-triangles where the interpolant is negative: (points T×3×2, values T×3, parent)."""
    tri = mesh.triangles
    val = psi[tri]
    pts = mesh.vertices[tri]
    neg = val < 0
    k = neg.sum(axis=1)
    out_p, out_v, out_t = [pts[k == 3]], [val[k == 3]], [np.flatnonzero(k == 3)]
    for count in (1, 2):
        idx = np.flatnonzero(k == count)
        if len(idx) == 0:
            continue
        sgn = neg[idx]
        odd = np.argmax(sgn, axis=1) if count == 1 else np.argmin(sgn, axis=1)
        rows = np.arange(len(idx))
        a, b, c = odd, (odd + 1) % 3, (odd + 2) % 3
        P, V = pts[idx], val[idx]
        pa, pb, pc = P[rows, a], P[rows, b], P[rows, c]
        va, vb, vc = V[rows, a], V[rows, b], V[rows, c]
        xb = pa + (va / (va - vb))[:, None] * (pb - pa)
        xc = pa + (va / (va - vc))[:, None] * (pc - pa)
        z = np.zeros(len(idx))
        if count == 1:  # negative corner triangle at a
            out_p.append(np.stack([pa, xb, xc], axis=1))
            out_v.append(np.column_stack([va, z, z]))
            out_t.append(idx)
        else:  # quadrilateral b, c, xc, xb split into two triangles
            out_p.append(np.stack([pb, pc, xc], axis=1))
            out_v.append(np.column_stack([vb, vc, z]))
            out_p.append(np.stack([pb, xc, xb], axis=1))
            out_v.append(np.column_stack([vb, z, z]))
            out_t.extend([idx, idx])
    return np.concatenate(out_p), np.concatenate(out_v), np.concatenate(out_t)


def _tri_area(p: np.ndarray) -> np.ndarray:
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def mass_diagnostics(mesh: Mesh, psi: np.ndarray, radii: RadiiTriple) -> tuple[float, float]:
    """``(|Ω⁻ ∩ A|, ‖ψ⁻‖_{L²(B_{R1})})`` with ``ψ⁻`` scaled to unit L² norm.

    The first is the negative area inside triangles whose centroid lies in
    ``r2 < r < r3``; the second integrates the linear field exactly on the
    negative pieces of triangles whose centroid lies in ``B_{R1}``.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.size == 0 or psi.min() > 0 or psi.max() < 0:
        raise NoNegativePartError("the field does not change sign")
    psi, _ = sign_normalize(mesh, psi)
    p, v, parent = _negative_pieces(mesh, psi)
    if len(p) == 0:
        raise NoNegativePartError("the field has no negative part")
    area = _tri_area(p)
    sq = area / 6.0 * (v[:, 0] ** 2 + v[:, 1] ** 2 + v[:, 2] ** 2 + v[:, 0] * v[:, 1] + v[:, 1] * v[:, 2] + v[:, 0] * v[:, 2])
    cen = mesh.centroids()[parent]
    r = np.hypot(cen[:, 0], cen[:, 1])
    in_a = (r > radii.r2) & (r < radii.r3)
    total = sq.sum()
    if total <= 0:
        raise NoNegativePartError("the field has no negative part")
    return float(area[in_a].sum()), float(math.sqrt(sq[r < radii.r1].sum() / total))


def _symmetry_points(mesh: Mesh, n: int, count: int) -> np.ndarray:
    v = mesh.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    sampler = qmc.Halton(d=2, scramble=False)
    loc = Locator(mesh)
    rot = np.array([[math.cos(geo.TWO_PI / n), -math.sin(geo.TWO_PI / n)], [math.sin(geo.TWO_PI / n), math.cos(geo.TWO_PI / n)]])
    kept: list[np.ndarray] = []
    have = 0
    sampler.fast_forward(1)  # skip the corner point (0, 0) of the unit square
    while have < count:
        pts = lo + sampler.random(2 * count) * (hi - lo)
        t1, _ = loc.locate(pts)
        t2, _ = loc.locate(pts @ rot.T)
        ok = pts[(t1 >= 0) & (t2 >= 0)]
        kept.append(ok)
        have += len(ok)
    return np.concatenate(kept)[:count]


def symmetry_defect(mesh: Mesh, psi: np.ndarray, n: int, samples: int = SYMMETRY_SAMPLES) -> float:
    """``max |ψ(p) − ψ(Rp)| / ‖ψ‖∞`` over a fixed Halton point set, ``R`` the 2π/n rotation."""
    psi = np.asarray(psi, dtype=float)
    pts = _symmetry_points(mesh, n, samples)
    c, s = math.cos(geo.TWO_PI / n), math.sin(geo.TWO_PI / n)
    rot = pts @ np.array([[c, -s], [s, c]]).T
    loc = Locator(mesh)
    a = loc.evaluate(psi, pts)
    b = loc.evaluate(psi, rot)
    sup = np.abs(psi).max(initial=0.0)
    if sup == 0.0:
        return 0.0
    return float(np.abs(a - b).max() / sup)


def _boundary_distance(mesh: Mesh, pts: np.ndarray, neighbours: int = 6) -> np.ndarray:
    """Distance from each point to the boundary polyline of ``mesh``."""
    be = mesh.boundary_edges
    a, b = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    tree = cKDTree(0.5 * (a + b))
    k = min(neighbours, len(be))
    _, idx = tree.query(pts, k=k)
    idx = idx.reshape(len(pts), -1)
    best = np.full(len(pts), np.inf)
    for j in range(idx.shape[1]):
        e = idx[:, j]
        d = b[e] - a[e]
        t = np.clip(((pts - a[e]) * d).sum(axis=1) / (d * d).sum(axis=1), 0.0, 1.0)
        foot = a[e] + t[:, None] * d
        best = np.minimum(best, np.hypot(*(pts - foot).T))
    return best


def nodal_boundary_distance(mesh: Mesh, nodal: NodalSet) -> float:
    if nodal.empty:
        return math.inf
    s = nodal.segments
    pts = np.concatenate([s[:, 0], s[:, 1], 0.5 * (s[:, 0] + s[:, 1])])
    return float(_boundary_distance(mesh, pts).min())


def interior_verdict(mesh: Mesh, psi: np.ndarray, dirichlet: bool | None = None, nodal: NodalSet | None = None) -> bool:
    """True iff the negative set stays strictly inside the domain.

    Every boundary-adjacent vertex must be positive and the nodal set must
    keep a distance above ``2h`` from the boundary polyline.
    """
    psi = np.asarray(psi, dtype=float)
    if dirichlet is None:
        dirichlet = _is_dirichlet_field(mesh, psi)
    if nodal is None:
        nodal = extract_nodal_set(mesh, psi, dirichlet)
    if nodal.empty or nodal.touches_boundary:
        return False
    return nodal_boundary_distance(mesh, nodal) > 2.0 * _mesh_resolution(mesh)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_segments(path, nodal: NodalSet) -> None:
    """Plain-text ``x1 y1 x2 y2`` lines, one per chord."""
    with open(path, "w") as fh:
        for (x1, y1), (x2, y2) in nodal.segments:
            fh.write(f"{float(x1)!r} {float(y1)!r} {float(x2)!r} {float(y2)!r}\n")


def read_segments(path) -> np.ndarray:
    data = np.loadtxt(path, ndmin=2)
    return data.reshape(-1, 2, 2) if data.size else np.zeros((0, 2, 2))
