import csv
import math
import xml.etree.ElementTree as ET

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nodal_lab import reports
from nodal_lab.experiments import SweepRecord
from nodal_lab.spectra import RadiiTriple
from records import fake_record

RADII = RadiiTriple(0.84637, 0.96778, 1.10465)
SVG = "{http://www.w3.org/2000/svg}"


def test_empty_records_give_header_only(tmp_path):
    written = reports.emit_reports([], tmp_path, 0.636, RADII)
    assert [p.name for p in written] == ["sweep.csv", "timings.csv"]
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines == [",".join(SweepRecord.columns())]
    assert reports.read_csv(tmp_path / "sweep.csv") == []


def test_one_record(tmp_path):
    rec = fake_record()
    written = reports.emit_reports([rec], tmp_path, 0.636, RADII)
    assert {p.name for p in written} == {"sweep.csv", "timings.csv", "nodal_8.txt", "contour_8.svg"}
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 2
    root = ET.parse(tmp_path / "contour_8.svg").getroot()
    circles = root.findall(f"{SVG}circle")
    assert len(circles) == 4
    assert [c.get("id") for c in circles] == ["R0", "R1", "R2", "R3"]
    radii = [float(c.get("r")) for c in circles]
    assert radii == sorted(radii)
    assert {p.get("id") for p in root.findall(f"{SVG}path")} == {"outline", "nodal"}
    seg = np.loadtxt(tmp_path / "nodal_8.txt")
    assert np.array_equal(seg.reshape(-1, 2, 2), rec.segments)


def test_timings_are_kept_apart(tmp_path):
    rec = fake_record(mesh_seconds=1.5, solve_seconds=2.5)
    reports.emit_reports([rec], tmp_path)
    assert "seconds" not in (tmp_path / "sweep.csv").read_text()
    rows = list(csv.DictReader(open(tmp_path / "timings.csv")))
    assert rows == [{"n": "8", "mesh_seconds": "1.5", "solve_seconds": "2.5", "nodal_seconds": "0"}]
    # no radii means no contour plot
    assert not list(tmp_path.glob("*.svg"))


floats = st.floats(allow_nan=False, allow_infinity=True, width=64)


@settings(max_examples=40)
@given(eps=floats, mu2=floats, kappa=st.floats(allow_nan=True), flag=st.booleans(), count=st.integers(0, 10**9))
def test_csv_roundtrip_is_exact(tmp_path_factory, eps, mu2, kappa, flag, count):
    recs = [fake_record(eps=eps, mu2=mu2, kappa=kappa, interior_verdict=flag, segment_count=count), fake_record(n=16)]
    path = tmp_path_factory.mktemp("csv") / "sweep.csv"
    reports.write_csv(recs, path)
    back = reports.read_csv(path)
    for a, b in zip(recs, back):
        for col in SweepRecord.columns():
            x, y = getattr(a, col), getattr(b, col)
            assert type(x) is type(y)
            assert x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))


def test_beta_table_csv(tmp_path):
    from nodal_lab.experiments import BetaRow, BetaTable

    table = BetaTable([BetaRow(0.0, False, 1.0, 5.0), BetaRow(1.0, True, 6.0, 5.0)], True, True, 1.0, 1.0, 0.0)
    reports.write_beta_table(table, tmp_path / "beta.csv")
    rows = list(csv.reader(open(tmp_path / "beta.csv")))
    assert rows[1] == ["0", "false", "1", "5", "true"]
    assert rows[2] == ["1", "true", "6", "5", "false"]
