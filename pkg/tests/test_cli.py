import csv
import io
import math
import subprocess
import sys

import pytest

import oracles
from nodal_lab import mesh as meshing
from nodal_lab.cli import main
from nodal_lab.spectra import BoundaryCondition, select_radii

SMALL = """
[domain]
variant = "dirichlet"
[mesh]
h = 0.08
[solve]
n = 8
eps = 0.1
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return {row[0]: row[1] for row in csv.reader(io.StringIO(text)) if len(row) == 2}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def test_radii_matches_library(capsys, tmp_path):
    code, out, _ = run(capsys, "radii", "--variant", "dirichlet", "--out", tmp_path / "r.csv")
    assert code == 0
    got = table(out)
    sel = select_radii(math.pi, BoundaryCondition.dirichlet(), 0.5)
    assert float(got["R1"]) == sel.radii.r1 and float(got["R0"]) == sel.r0
    assert got["ordered"] == "true"
    assert (tmp_path / "r.csv").read_text() == out


def test_spectrum_disk(capsys):
    code, out, _ = run(capsys, "spectrum", "--domain", "disk", "--count", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert float(rows[0]["eigenvalue"]) == pytest.approx(oracles.J01**2, rel=1e-12)
    assert float(rows[1]["eigenvalue"]) == pytest.approx(oracles.J11**2, rel=1e-12)
    assert rows[1]["multiplicity"] == "2" and rows[1]["angular_order"] == "1"


def test_spectrum_annulus_neumann(capsys):
    code, out, _ = run(capsys, "spectrum", "--domain", "annulus", "--inner", 0.5, "--outer", 1.0, "--variant", "robin", "--beta", 0, "--count", 2)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and float(rows[0]["eigenvalue"]) == 0.0


def test_solve(capsys, small_config):
    code, out, _ = run(capsys, "solve", "--config", small_config)
    got = table(out)
    assert code == 0
    assert got["n"] == "8" and float(got["eps"]) == 0.1
    assert float(got["mu1"]) < float(got["mu2"]) <= float(got["mu3"])
    assert got["nodal_domains"] == "2"


def test_mesh_export(capsys, small_config, tmp_path):
    target = tmp_path / "mesh.txt"
    code, out, _ = run(capsys, "mesh", "--config", small_config, "--export", target)
    assert code == 0 and "n=8" in out
    m = meshing.read_mesh(target)
    m.check()
    assert f"vertices={m.n_vertices}" in out


def test_errors_exit_with_one(capsys, tmp_path):
    code, _, err = run(capsys, "radii", "--delta", "0.99")
    assert code == 1 and err.startswith("error:")
    bad = tmp_path / "bad.toml"
    bad.write_text("[domain]\nvariant = 'neumann'\n")
    code, _, err = run(capsys, "solve", "--config", bad)
    assert code == 1 and "variant" in err


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "nodal_lab.cli", "spectrum", "--domain", "disk", "--count", "1"], capture_output=True, text=True, check=True
    ).stdout
    assert out.splitlines()[0] == "eigenvalue,angular_order,radial_index,multiplicity"
