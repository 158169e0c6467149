"""Sweep outputs: ``sweep.csv``, ``timings.csv``, ``nodal_<n>.txt`` and ``contour_<n>.svg``.

``sweep.csv`` columns, one row per accepted (n, eps):

    n, eps                  polygon index and passage half-angle
    mu1, mu2, mu3           lowest three FEM eigenvalues of the composite
    mu2_gap                 (mu2 - mu1(A)) / mu1(A)
    simplicity_gap          (mu3 - mu2) / mu2
    R_nodal_ball            radius whose first Dirichlet disk eigenvalue is mu2
    r_min, rho              smallest and largest radius reached by the nodal set
    nodal_length            total length of the nodal set
    segment_count           number of nodal chords
    nodal_domains           connected sign components of psi_2
    touches_boundary        nodal set meets the boundary ring
    boundary_distance       distance from the nodal set to the boundary
    sigma_in_disk           nodal length inside B(R1 - delta1)
    sigma_lower_bound       n (min(R1 - delta1, rho) - R_nodal_ball)
    sigma_half_plane        nodal length in x >= 0
    kappa                   sup|psi| on B(R1 - delta1) over sup|psi| on B(R1 - delta0)
    interior_verdict        nodal set strictly inside the domain
    symmetry_defect         max |psi(p) - psi(Rp)| / sup|psi| for the 2pi/n rotation R
    mass_minus_in_A         area of the negative set inside the annulus
    l2_mass_minus_in_B_R1   L2 share of the negative part inside B(R1)
    mu1_core, mu2_core      first two eigenvalues of the core alone
    vertices, triangles     mesh size
    eps_candidates          grid angles tried before acceptance

Floats use 17 significant digits and booleans ``true``/``false``, so parsing
the file gives back the recorded values exactly.  Wall-clock times go to
``timings.csv`` to keep ``sweep.csv`` reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .experiments import BetaTable, SweepRecord

_TYPES = {f.name: f.type for f in fields(SweepRecord)}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _parse(name: str, text: str):
    kind = _TYPES[name]
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    if kind == "int":
        return int(text)
    return float(text)


def write_csv(records: list[SweepRecord], path) -> None:
    cols = SweepRecord.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


def read_csv(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [SweepRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in rows]


def write_timings(records: list[SweepRecord], path) -> None:
    cols = ["n"] + SweepRecord.timing_columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


def write_beta_table(table: BetaTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "interior_verdict", "mu2", "lambda1", "mu2_below_lambda1"])
        for r in table.rows:
            w.writerow([_fmt(r.beta), _fmt(r.interior_verdict), _fmt(r.mu2), _fmt(r.lambda1), _fmt(r.below_lambda1)])


def write_segments(segments: np.ndarray | None, path) -> None:
    with open(path, "w") as fh:
        for (x1, y1), (x2, y2) in (segments if segments is not None else []):
            fh.write(f"{float(x1)!r} {float(y1)!r} {float(x2)!r} {float(y2)!r}\n")


def _path_data(segs: np.ndarray, scale: float, offset: float) -> str:
    """SVG path data, ``M``/``L`` runs for chains of touching segments."""
    parts = []
    last = None
    for a, b in segs:
        pa = (offset + scale * a[0], offset - scale * a[1])
        pb = (offset + scale * b[0], offset - scale * b[1])
        if last is None or abs(last[0] - pa[0]) > 1e-9 or abs(last[1] - pa[1]) > 1e-9:
            parts.append(f"M{pa[0]:.3f} {pa[1]:.3f}")
        parts.append(f"L{pb[0]:.3f} {pb[1]:.3f}")
        last = pb
    return "".join(parts)


def contour_svg(record: SweepRecord, circles: dict[str, float], size: int = 800) -> str:
    """Mesh outline, nodal polyline and one labelled circle per entry of ``circles``."""
    reach = max(circles.values())
    if record.outline is not None and len(record.outline):
        reach = max(reach, float(np.abs(record.outline).max()))
    scale = 0.48 * size / reach
    c = size / 2
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f"<title>n={record.n} eps={record.eps:.6g} mu2={record.mu2:.8g}</title>",
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if record.outline is not None and len(record.outline):
        out.append(f'<path id="outline" d="{_path_data(record.outline, scale, c)}" fill="none" stroke="black" stroke-width="0.8"/>')
    colours = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"]
    for (label, r), colour in zip(circles.items(), colours * 4):
        out.append(
            f'<circle id="{label}" cx="{c:.3f}" cy="{c:.3f}" r="{scale * r:.3f}" fill="none" '
            f'stroke="{colour}" stroke-dasharray="4 3" stroke-width="0.8"/>'
        )
    if record.segments is not None and len(record.segments):
        out.append(f'<path id="nodal" d="{_path_data(record.segments, scale, c)}" fill="none" stroke="red" stroke-width="1.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def reference_circles(r0: float, radii) -> dict[str, float]:
    return {"R0": r0, "R1": radii.r1, "R2": radii.r2, "R3": radii.r3}


def emit_reports(records: list[SweepRecord], outdir, r0: float = math.nan, radii=None) -> list[Path]:
    """Write every report file for ``records`` into ``outdir``; returns the paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "sweep.csv", out / "timings.csv"]
    write_csv(records, written[0])
    write_timings(records, written[1])
    for r in records:
        p = out / f"nodal_{r.n}.txt"
        write_segments(r.segments, p)
        written.append(p)
        if radii is not None:
            p = out / f"contour_{r.n}.svg"
            p.write_text(contour_svg(r, reference_circles(r0, radii)))
            written.append(p)
    return written
