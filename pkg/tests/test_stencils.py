import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zakai_fd import kernels
from zakai_fd.model import Field, Grid2D
from zakai_fd.stencils import (
    apply_dx,
    apply_dxx,
    apply_dxy,
    apply_fused,
    dx,
    dx2,
    dxx,
    dxy,
    dy,
    dy2,
    dyy,
    fused_weights,
)

OPS = [dx, dy, dxx, dyy, dxy, dx2, dy2]
finite = st.floats(-1e3, 1e3, allow_nan=False)
fields = arrays(np.float64, st.tuples(st.integers(5, 12), st.integers(5, 12)), elements=finite)


def test_constant_field_dx_vanishes_inside():
    a = np.full((7, 7), 3.0)
    assert np.all(dx(a)[1:-1, :] == 0)
    assert np.all(dy(a)[:, 1:-1] == 0)


def test_spike_dxx():
    a = np.zeros((5, 5))
    a[2, 2] = 1.0
    r = dxx(a)
    assert (r[1, 2], r[2, 2], r[3, 2]) == (1.0, -2.0, 1.0)
    assert np.count_nonzero(r) == 3


def test_dxy_on_product():
    i, j = np.meshgrid(np.arange(5.0), np.arange(5.0), indexing="ij")
    assert dxy(i * j)[2, 2] == 4.0


def test_zero_ghosts():
    a = np.zeros((4, 4))
    a[0, 1] = 1.0
    assert dx(a)[0, 1] == 0.0 and dx(a)[1, 1] == -1.0
    assert dx2(a)[0, 1] == -2.0 and dx2(a)[2, 1] == 1.0


def test_field_wrappers():
    g = Grid2D.square(0, 3, 0.5)
    f = Field(np.arange(25.0).reshape(5, 5), g)
    out = apply_dxx(f)
    assert out.grid is g
    np.testing.assert_array_equal(out.values, dxx(f.values))
    np.testing.assert_array_equal(apply_dx(f).values, dx(f.values))
    np.testing.assert_array_equal(apply_dxy(f).values, dxy(f.values))


@given(fields, fields, finite, finite)
def test_linearity(a, b, al, be):
    if a.shape != b.shape:
        b = np.resize(b, a.shape)
    for op in OPS:
        lhs = op(al * a + be * b)
        rhs = al * op(a) + be * op(b)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-6)


@given(fields)
def test_wide_is_composition(a):
    np.testing.assert_allclose(dx2(a)[2:-2, :], dx(dx(a))[2:-2, :], rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(dy2(a)[:, 2:-2], dy(dy(a))[:, 2:-2], rtol=1e-12, atol=1e-9)


@given(fields, fields)
def test_summation_by_parts(f, g):
    if f.shape != g.shape:
        g = np.resize(g, f.shape)
    f = f.copy()
    g = g.copy()
    for a in (f, g):
        a[:1, :] = a[-1:, :] = 0
        a[:, :1] = a[:, -1:] = 0
    lhs = (g * dx(f)).sum()
    rhs = -(dx(g) * f).sum()
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


@given(fields, st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_fused_matches_operators(a, c):
    w = fused_weights(*c)
    expect = (c[0] * a + c[1] * dx(a) + c[2] * dy(a) + c[3] * dxx(a) + c[4] * dyy(a)
              + c[5] * dx2(a) + c[6] * dy2(a) + c[7] * dxy(a))
    for be in ("python", kernels.BACKEND):
        np.testing.assert_allclose(apply_fused(a, w, be), expect, rtol=1e-10, atol=1e-8)


def test_backends_bit_identical():
    if kernels.BACKEND != "cython":
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(0)
    a = rng.standard_normal((40, 33))
    w = fused_weights(*rng.standard_normal(8))
    assert np.array_equal(apply_fused(a, w, "cython"), apply_fused(a, w, "python"))
