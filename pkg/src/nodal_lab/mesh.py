"""Triangular meshes of the domains, with a graded size field.

Meshes are generated by Shewchuk's Triangle (constrained Delaunay with
Ruppert-style quality refinement) from the exact boundary polylines.  Boundary
segments that Triangle wants to split are bisected on the analytic boundary
instead, so every boundary vertex stays on the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle as shewchuk

from . import geometry as geo
from .geometry import Annulus, Composite, Disk, DomainSpec, PerturbedDisk

BOUNDARY_TAG = "outer-boundary"
MIN_ANGLE = 20.0
# equilateral triangle with edge h
_AREA_PER_H2 = math.sqrt(3.0) / 4.0


class MeshError(RuntimeError):
    pass


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: list[str]
    h_target: float = float("nan")
    spec: DomainSpec | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.boundary_vertices = np.unique(self.boundary_edges)
        self.boundary_mask = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_mask[self.boundary_vertices] = True

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and, per triangle, the index of each local edge.

        Local edge ``i`` of a triangle joins its vertices ``i`` and ``i+1``.
        """
        t = self.triangles
        all_e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        all_e.sort(axis=1)
        uniq, inv = np.unique(all_e, axis=0, return_inverse=True)
        return uniq, inv.reshape(3, -1).T

    def boundary_length(self) -> float:
        e = self.boundary_edges
        return float(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1).sum())

    def check(self, boundary_tol: float = 1e-10) -> None:
        """Raise ``MeshError`` unless all structural invariants hold."""
        if np.any(self.signed_areas() <= 0):
            raise MeshError("triangle with nonpositive signed area")
        uniq, local = self.edges()
        counts = np.bincount(local.ravel(), minlength=len(uniq))
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        bnd = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        single = {tuple(e) for e in uniq[counts == 1].tolist()}
        if bnd != single:
            raise MeshError("boundary edges differ from edges with exactly one triangle")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError("unreferenced vertex")
        if self.spec is not None:
            res = geo.boundary_residual(self.spec, self.vertices[self.boundary_vertices])
            if res.max() > boundary_tol:
                raise MeshError(f"boundary vertex off the analytic boundary by {res.max():.3g}")


# ---------------------------------------------------------------------------
# size field
# ---------------------------------------------------------------------------


def size_field(spec: DomainSpec, h: float, points_per_wave: int = 24):
    """Target edge length as a function of position (vectorised)."""
    grade = 0.5
    passage_grade = 1.0

    wavy = isinstance(spec, PerturbedDisk) or (isinstance(spec, Composite) and spec.perturbed)
    if wavy:
        r1, n = (spec.r1, spec.n) if isinstance(spec, PerturbedDisk) else (spec.radii.r1, spec.n)
        hc = geo.curve_spacing(r1, n, h, points_per_wave)
        band_lo, band_hi = r1 * (1 - 1.0 / n), r1 * (1 + 1.0 / n)
    if isinstance(spec, Composite):
        hp = geo.passage_size(spec, h)
        r2 = spec.radii.r2
        w = spec.n * spec.n
        # the core boundary inside a passage never dips below this radius
        if spec.perturbed:
            dip = -1.0 if w * spec.eps >= math.pi else math.cos(w * spec.eps)
            mouth = spec.radii.r1 * (1.0 + dip / spec.n) - 2.0 * hp
        else:
            mouth = spec.radii.r1 - 2.0 * hp

    def field_(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.full(np.broadcast(x, y).shape, float(h))
        if not isinstance(spec, (PerturbedDisk, Composite)):
            return s
        r = np.hypot(x, y)
        if wavy:
            d_band = np.maximum(0.0, np.maximum(band_lo - r, r - band_hi))
            s = np.minimum(s, hc + grade * d_band)
        if isinstance(spec, Composite):
            off = geo._angle_to_nearest_passage(np.arctan2(y, x), spec.n)
            lateral = np.maximum(0.0, off - spec.eps) * r
            radial = np.maximum(0.0, np.maximum(mouth - r, r - r2))
            s = np.minimum(s, hp + passage_grade * np.hypot(lateral, radial))
        return s

    return field_


def _hole_points(spec: DomainSpec) -> np.ndarray | None:
    if isinstance(spec, Annulus):
        return np.zeros((1, 2))
    if isinstance(spec, Composite):
        r1, r2, _ = spec.radii.as_tuple()
        th = geo.TWO_PI * (np.arange(spec.n) + 0.5) / spec.n
        rr = 0.5 * (spec.core_radius(th) + r2)
        return np.column_stack([rr * np.cos(th), rr * np.sin(th)])
    return None


def _angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    out = np.empty((len(triangles), 3))
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        c = (a * b).sum(axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, i] = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    return out


def _run_triangle(pslg: dict, spec: DomainSpec, h: float, sizes, holes, switches: str, max_passes: int) -> dict:
    out = shewchuk.triangulate(pslg, switches + f"a{_AREA_PER_H2 * h * h:.17g}")
    for _ in range(max_passes):
        cen = out["vertices"][out["triangles"]].mean(axis=1)
        target = _AREA_PER_H2 * sizes(cen[:, 0], cen[:, 1]) ** 2
        p = out["vertices"][out["triangles"]]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.all(areas <= 1.05 * target):
            break
        out["triangle_max_area"] = target
        if holes is not None:
            out["holes"] = holes
        out = shewchuk.triangulate(out, "r" + switches + "a")
        out.pop("triangle_max_area", None)
    return out


def triangulate(
    spec: DomainSpec, h: float, points_per_wave: int = 24, max_passes: int = 8, max_boundary_passes: int = 12
) -> Mesh:
    """Quality mesh of ``spec`` with edges near ``h`` (finer in passages and wiggles).

    Triangle may split boundary segments to meet the angle bound.  Its split
    points lie on chords, so every split segment is instead bisected on the
    analytic boundary and the mesh regenerated, until a pass leaves the
    boundary alone.  If that does not settle, a last pass forbids boundary
    splits (``Y``) and the angle bound may fail near the offending segments.
    """
    comps = [c.points.copy() for c in geo.boundary_polyline(spec, h, points_per_wave)]
    holes = _hole_points(spec)
    sizes = size_field(spec, h, points_per_wave)
    for attempt in range(max_boundary_passes + 1):
        verts, segs, off = [], [], 0
        for c in comps:
            m = len(c)
            verts.append(c)
            idx = np.arange(m) + off
            segs.append(np.column_stack([idx, np.roll(idx, -1)]))
            off += m
        segs_all = np.vstack(segs)
        pslg = {
            "vertices": np.vstack(verts),
            "segments": segs_all,
            "segment_markers": np.arange(2, len(segs_all) + 2, dtype=np.int32),
        }
        if holes is not None:
            pslg["holes"] = holes
        last = attempt == max_boundary_passes
        switches = f"pq{MIN_ANGLE:g}" + ("Y" if last else "")
        out = _run_triangle(pslg, spec, h, sizes, holes, switches, max_passes)
        if last:
            break
        markers = np.asarray(out["segment_markers"]).ravel() - 2
        split = np.bincount(markers[markers >= 0], minlength=len(segs_all)) > 1
        if not split.any():
            break
        comps = _bisect_segments(spec, comps, split)
    return _from_triangle(out, spec, h)


def _bisect_segments(spec: DomainSpec, comps: list[np.ndarray], split: np.ndarray) -> list[np.ndarray]:
    new, off = [], 0
    for c in comps:
        m = len(c)
        flags = split[off : off + m]
        pts = []
        for i in range(m):
            pts.append(c[i])
            if flags[i]:
                pts.append(geo.boundary_midpoint(spec, c[i], c[(i + 1) % m]))
        new.append(np.asarray(pts))
        off += m
    return new


def _from_triangle(out: dict, spec: DomainSpec, h: float) -> Mesh:
    v = np.asarray(out["vertices"], dtype=float)
    t = np.asarray(out["triangles"], dtype=np.int64)
    # Triangle emits counter-clockwise triangles; enforce it regardless
    p = v[t]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    t[sa < 0] = t[sa < 0][:, [0, 2, 1]]
    used = np.zeros(len(v), dtype=bool)
    used[t.ravel()] = True
    if not used.all():
        remap = -np.ones(len(v), dtype=np.int64)
        remap[used] = np.arange(used.sum())
        v, t = v[used], remap[t]
    tmp = Mesh(v, t, np.zeros((0, 2), dtype=np.int64), [], h, spec)
    uniq, local = tmp.edges()
    counts = np.bincount(local.ravel(), minlength=len(uniq))
    bedges = _orient_boundary_edges(t, uniq[counts == 1])
    mesh = Mesh(v, t, bedges, [BOUNDARY_TAG] * len(bedges), h, spec)
    centroids_ok = geo.contains_xy(spec, *mesh.centroids().T)
    if not centroids_ok.all():
        raise MeshError(f"{int((~centroids_ok).sum())} triangle centroids fall outside the domain")
    return mesh


def _orient_boundary_edges(t: np.ndarray, bedges: np.ndarray) -> np.ndarray:
    """Orient each boundary edge along its triangle (domain on the left)."""
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    nv = int(t.max()) + 1
    keys = np.minimum(directed[:, 0], directed[:, 1]) * nv + np.maximum(directed[:, 0], directed[:, 1])
    bkeys = bedges.min(axis=1) * nv + bedges.max(axis=1)
    return directed[np.isin(keys, bkeys)]


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four; boundary midpoints go onto the analytic boundary."""
    uniq, local = mesh.edges()
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    edge_key = {tuple(e): i for i, e in enumerate(uniq.tolist())}
    b_idx = np.array([edge_key[tuple(sorted(e))] for e in mesh.boundary_edges.tolist()], dtype=np.int64)
    if mesh.spec is not None:
        for bi, (a, b) in zip(b_idx, mesh.boundary_edges):
            mids[bi] = geo.boundary_midpoint(mesh.spec, mesh.vertices[a], mesh.vertices[b])
    nv = mesh.n_vertices
    verts = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m01, m12, m20 = (local[:, 0] + nv, local[:, 1] + nv, local[:, 2] + nv)
    tris = np.concatenate(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    be = mesh.boundary_edges
    bm = b_idx + nv
    bedges = np.concatenate([np.column_stack([be[:, 0], bm]), np.column_stack([bm, be[:, 1]])])
    out = Mesh(verts, tris, bedges, [BOUNDARY_TAG] * len(bedges), 0.5 * mesh.h_target, mesh.spec)
    if np.any(out.signed_areas() <= 0):
        raise MeshError("boundary projection inverted a triangle during refinement")
    return out


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def region_labels(mesh: Mesh) -> np.ndarray | None:
    """Per-triangle label for a composite mesh: 0 core, 1 annulus, 2 passage."""
    spec = mesh.spec
    if not isinstance(spec, Composite):
        return None
    c = mesh.centroids()
    r = np.hypot(c[:, 0], c[:, 1])
    th = np.arctan2(c[:, 1], c[:, 0])
    core = r < spec.core_radius(th)
    ring = r > spec.radii.r2
    return np.where(core, 0, np.where(ring, 1, 2))


def quality_report(mesh: Mesh, bins: int = 10) -> dict:
    ang = _angles(mesh.vertices, mesh.triangles)
    uniq, _ = mesh.edges()
    lengths = np.linalg.norm(mesh.vertices[uniq[:, 1]] - mesh.vertices[uniq[:, 0]], axis=1)
    hist, edges = np.histogram(lengths, bins=bins)
    report = {
        "triangles": mesh.n_triangles,
        "vertices": mesh.n_vertices,
        "min_angle": float(ang.min()),
        "max_angle": float(ang.max()),
        "min_edge": float(lengths.min()),
        "max_edge": float(lengths.max()),
        "edge_histogram": (hist.tolist(), edges.tolist()),
        "boundary_length": mesh.boundary_length(),
        "area": mesh.area(),
    }
    labels = region_labels(mesh)
    if labels is not None:
        report["region_triangles"] = {
            "core": int((labels == 0).sum()),
            "annulus": int((labels == 1).sum()),
            "passages": int((labels == 2).sum()),
        }
    return report


def min_angle_away_from_corners(mesh: Mesh, corners: np.ndarray) -> float:
    """Smallest angle over triangles not touching a vertex within one ring of a corner."""
    ang = _angles(mesh.vertices, mesh.triangles)
    if len(corners) == 0:
        return float(ang.min())
    corner_ids = set()
    for c in np.atleast_2d(corners):
        d = np.linalg.norm(mesh.vertices - c, axis=1)
        corner_ids.add(int(np.argmin(d)))
    touches = np.isin(mesh.triangles, list(corner_ids)).any(axis=1)
    ring = np.unique(mesh.triangles[touches])
    exempt = np.isin(mesh.triangles, ring).any(axis=1)
    return float(ang[~exempt].min()) if np.any(~exempt) else float("nan")


def corner_points(spec: DomainSpec) -> np.ndarray:
    pts = []
    for comp in geo.boundary_polyline(spec, 1.0 if not isinstance(spec, Composite) else geo.passage_size(spec, 1.0) * 4):
        pts.extend(comp.points[list(comp.corners)])
    return np.asarray(pts).reshape(-1, 2)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    """``V T B`` header, then ``x y``, ``i j k`` and ``i j tag`` lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r}\n")
        for i, j, k in mesh.triangles.tolist():
            fh.write(f"{i} {j} {k}\n")
        for (i, j), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags):
            fh.write(f"{i} {j} {tag}\n")


def read_mesh(path, spec: DomainSpec | None = None) -> Mesh:
    with open(path) as fh:
        nv, nt, nb = (int(s) for s in fh.readline().split())
        verts = [tuple(float(s) for s in fh.readline().split()) for _ in range(nv)]
        tris = [tuple(int(s) for s in fh.readline().split()) for _ in range(nt)]
        bedges, tags = [], []
        for _ in range(nb):
            i, j, tag = fh.readline().split()
            bedges.append((int(i), int(j)))
            tags.append(tag)
    return Mesh(np.array(verts).reshape(-1, 2), np.array(tris).reshape(-1, 3), np.array(bedges).reshape(-1, 2), tags, spec=spec)
