import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zakai_fd.errors import DomainError, ParameterError
from zakai_fd.model import (
    Field,
    Grid2D,
    ModelParams,
    OffGridWarning,
    TimeGrid,
    dirac_initial,
    field_summary,
    gaussian_initial,
    mass,
    write_field_csv,
    write_field_summary,
)


def test_params_invariants():
    ModelParams(0.1, -0.2, 0.0, 0.99, -1.0)
    for bad in (dict(rho_x=1.0), dict(rho_y=-0.1), dict(rho_xy=1.5)):
        with pytest.raises(ParameterError):
            ModelParams(**bad)


def test_grid_counts_and_coordinates():
    g = Grid2D(-8, 12, -8, 12, 0.5, 0.25)
    assert g.shape == (39, 79)
    assert g.x[0] == -7.5 and g.x[-1] == 11.5
    assert g.x_full[0] == -8 and g.x_full[-1] == 12
    with pytest.raises(ParameterError):
        Grid2D(0, 1, 0, 1, 0.3, 0.5)
    with pytest.raises(ParameterError):
        Grid2D(0, 1, 0, 1, 0.5, 0.5, n_x=3)


@given(st.integers(1, 6), st.integers(0, 200), st.integers(0, 200))
def test_index_round_trip(p, i, j):
    g = Grid2D(-3, 7, 0, 1.5, 10 / 2 ** (p + 2), 1.5 / 2 ** (p + 2))
    i = 1 + i % g.n_x
    j = 1 + j % g.n_y
    assert g.index_of(*g.coord_of(i, j)) == (i, j)


def test_timegrid():
    tg = TimeGrid.from_step(1.0, 2.0 ** -8)
    assert tg.N == 256 and tg.k * tg.N == 1.0
    with pytest.raises(ParameterError):
        TimeGrid.from_step(1.0, 0.3)


def test_dirac_value_and_mass():
    g = Grid2D.square(-8, 12, 1 / 16)
    f = dirac_initial(g, 2.0, 2.0)
    assert f.values.max() == 256.0
    assert np.count_nonzero(f.values) == 1
    assert mass(f) == 1.0


@given(st.integers(0, 4), st.integers(0, 4), st.integers(-15, 15), st.integers(-15, 15))
def test_dirac_mass_exact_on_grid(px, py, a, b):
    hx, hy = 2.0 ** -px, 2.0 ** -py
    g = Grid2D(-16, 16, -16, 16, hx, hy)
    f = dirac_initial(g, a * 1.0, b * 1.0)
    assert abs(mass(f) - 1.0) <= 2 * np.finfo(float).eps


def test_dirac_off_grid_warns_and_rounds():
    g = Grid2D(0, 4, 0, 4, 0.25, 0.25)
    with pytest.warns(OffGridWarning):
        f = dirac_initial(g, 2.03, 2.0)
    i, j = np.unravel_index(np.argmax(f.values), g.shape)
    assert i + 1 == 8 and j + 1 == 8


def test_dirac_outside_domain():
    g = Grid2D.square(0, 4, 0.5)
    with pytest.raises(DomainError):
        dirac_initial(g, 5.0, 1.0)


def test_gaussian_peak_and_symmetry():
    g = Grid2D.square(-8, 12, 0.25)
    f = gaussian_initial(g, ModelParams(), 2.0, 2.0)
    i0, j0 = g.index_of(2.0, 2.0)
    assert f.values[i0 - 1, j0 - 1] == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    for m in range(1, 10):
        assert f.values[i0 - 1 + m, j0 - 1] == f.values[i0 - 1 - m, j0 - 1]


def test_gaussian_mass():
    g = Grid2D.square(-8, 12, 0.125)
    f = gaussian_initial(g, ModelParams(), 2.0, 2.0)
    assert abs(mass(f) - 1.0) < 1e-8


def test_mass_examples():
    g = Grid2D.square(0, 2.5, 0.5)
    assert mass(Field.zeros(g)) == 0.0
    assert mass(Field(np.ones((4, 4)), g)) == 4.0


def test_field_shape_checked():
    g = Grid2D.square(0, 2.5, 0.5)
    with pytest.raises(ParameterError):
        Field(np.ones((3, 4)), g)


def test_field_csv_and_summary(tmp_path):
    g = Grid2D.square(0, 2.5, 0.5)
    f = dirac_initial(g, 1.0, 1.5)
    write_field_csv(f, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 16
    s = field_summary(f)
    assert s["mass"] == 1.0 and s["argmax"] == [1.0, 1.5]
    write_field_summary(f, tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["max"] == 4.0
