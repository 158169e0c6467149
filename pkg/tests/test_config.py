import math

import pytest

from nodal_lab.config import DEFAULT_BETA_GRID, ConfigError, SweepConfig, load_config, parse_config

EXAMPLE = """
seed = 3

[domain]
area = 6.283185307179586
variant = "dirichlet"
radii_delta = 0.4

[sweep]
n_schedule = [6, 10]
eps_start = 0.2
eps_ratio = 0.5
eps_floor = 0.01

[tolerances]
mu2_gap = 0.02
gap_power = 1.0
simplicity = 0.001
mass = 0.05

[mesh]
h = 0.04
points_per_wave = 16

[margins]
delta0 = 0.02
delta1 = 0.05

[solve]
n = 10
eps = 0.05
count = 4

[beta_sweep]
grid = [0.0, 1.0, 5.0]
"""


def test_defaults():
    c = SweepConfig()
    assert c.M == math.pi and c.beta == 1.0 and c.bc_variant == "robin"
    assert c.n_schedule == (4, 6, 8, 12, 16)
    assert c.beta_grid == DEFAULT_BETA_GRID and c.seed == 0
    r = c.resolved()
    assert r.core == "perturbed" and r.radii_delta == 0.1
    d = SweepConfig(bc_variant="dirichlet").resolved()
    assert d.core == "disk" and d.radii_delta == 0.5 and d.bc.is_dirichlet


def test_parse_every_section(tmp_path):
    c = parse_config(EXAMPLE)
    assert c.seed == 3 and c.M == 2 * math.pi and c.bc_variant == "dirichlet"
    assert c.n_schedule == (6, 10) and c.eps_start == 0.2 and c.eps_floor == 0.01
    assert (c.mu2_gap_tol, c.gap_tol_power, c.simplicity_tol, c.mass_tol) == (0.02, 1.0, 0.001, 0.05)
    assert (c.h, c.points_per_wave, c.delta0, c.delta1) == (0.04, 16, 0.02, 0.05)
    assert (c.solve_n, c.solve_eps, c.count) == (10, 0.05, 4)
    assert c.beta_grid == (0.0, 1.0, 5.0)
    assert c.resolved().core == "disk"
    path = tmp_path / "c.toml"
    path.write_text(EXAMPLE)
    assert load_config(path) == c


def test_explicit_values_survive_resolution():
    c = parse_config('[domain]\ncore = "disk"\n[sweep]\neps_start = 0.01\n').resolved()
    assert c.core == "disk" and c.eps_start == 0.01 and c.eps_ratio == 0.5


@pytest.mark.parametrize(
    "text",
    [
        "[domain]\nvariant = 'neumann'\n",
        "[domain]\nbogus = 1\n",
        "[nowhere]\nx = 1\n",
        "[sweep]\nn_schedule = []\n",
        "[sweep]\neps_ratio = 1.5\n",
        "[mesh]\nh = -1\n",
        "[beta_sweep]\ngrid = [1.0, 0.0]\n",
        "[solve]\ncount = 2\n",
        "[domain]\nbeta = 0.0\n",
        "not toml ===",
    ],
)
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_eps_grid():
    c = SweepConfig(bc_variant="dirichlet")
    grid = c.eps_grid(16)
    assert grid[0] == pytest.approx(0.95 * math.pi / 32)
    assert all(b == pytest.approx(0.75 * a) for a, b in zip(grid, grid[1:]))
    assert grid[-1] >= 0.02 > grid[-1] * 0.75
    assert c.eps_grid(4)[0] == pytest.approx(min(c.resolved().eps_start, 0.95 * math.pi / 8))
    assert c.eps_grid(2)[0] == c.resolved().eps_start
    assert SweepConfig(eps_start=1e-5, eps_floor=1e-4).eps_grid(4) == [1e-5]


def test_gap_tolerance_scaling():
    c = SweepConfig()
    assert c.gap_tolerance(16) == pytest.approx(0.04)
    assert c.gap_tolerance(8) == pytest.approx(0.04 * 8)


def test_to_dict_roundtrip():
    c = parse_config(EXAMPLE)
    assert SweepConfig(**c.to_dict()) == c
