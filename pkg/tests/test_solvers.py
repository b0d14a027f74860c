import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zakai_fd import kernels
from zakai_fd.errors import IterationError, SingularMatrixError
from zakai_fd.model import Field, Grid2D, ModelParams
from zakai_fd.schemes import implicit_lhs_weights
from zakai_fd.solvers import (
    Tridiag,
    assemble_dense,
    factor_lines,
    solve_unfactored,
    spectral_solver,
    thomas_solve,
)
from zakai_fd.stencils import apply_fused, fused_weights


def _op(grid, p, k):
    w = fused_weights(**implicit_lhs_weights(p, k, grid.h_x, grid.h_y))
    return lambda f: Field(apply_fused(f.values, w), f.grid)


def test_thomas_identity():
    n = 6
    r = np.arange(n, dtype=float)
    m = Tridiag(np.zeros(n), np.ones(n), np.zeros(n))
    np.testing.assert_array_equal(thomas_solve(m, r), r)


def test_thomas_two_by_two():
    m = Tridiag(np.array([0.0, 1.0]), np.array([2.0, 2.0]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(thomas_solve(m, np.array([3.0, 3.0])), [1.0, 1.0], rtol=1e-15)


def test_thomas_random_dominant_residual():
    rng = np.random.default_rng(4)
    n = 64
    lo, up = rng.uniform(-1, 1, (2, n))
    d = np.abs(lo) + np.abs(up) + rng.uniform(0.1, 2, n)
    m = Tridiag(lo, d * rng.choice([-1, 1], n), up)
    assert m.dominant
    rhs = rng.standard_normal(n)
    x = thomas_solve(m, rhs)
    assert np.max(np.abs(m.matvec(x) - rhs)) < 1e-10


@given(st.integers(2, 128), st.integers(0, 2 ** 32))
def test_thomas_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    lo, up = rng.uniform(-1, 1, (2, n))
    d = 1.5 * (np.abs(lo) + np.abs(up)) + 0.5
    m = Tridiag(lo, d, up)
    rhs = rng.standard_normal(n)
    np.testing.assert_allclose(thomas_solve(m, rhs), np.linalg.solve(m.to_dense(), rhs),
                               rtol=0, atol=1e-9)


def test_singular_pivot_names_row():
    m = Tridiag(np.array([0.0, 1.0, 1.0]), np.array([1.0, 1.0, 2.0]), np.array([1.0, 1.0, 0.0]))
    with pytest.raises(SingularMatrixError) as e:
        thomas_solve(m, np.ones(3))
    assert e.value.row == 1


def test_line_factor_backends_agree():
    rng = np.random.default_rng(1)
    shape = (17, 23)
    for axis in (0, 1):
        lo, up = rng.uniform(-1, 1, (2,) + shape)
        d = 3 + rng.uniform(0, 1, shape)
        f = factor_lines(lo, d, up, axis=axis)
        rhs = rng.standard_normal(shape)
        xs = [kernels.solve_lines(f, rhs, be) for be in ("python", kernels.BACKEND)]
        np.testing.assert_allclose(xs[0], xs[1], rtol=1e-13, atol=1e-13)
        # direct check on one line
        line = 5
        sl = (slice(None), line) if axis == 0 else (line, slice(None))
        m = Tridiag(lo[sl], d[sl], up[sl])
        np.testing.assert_allclose(xs[0][sl], thomas_solve(m, rhs[sl]), rtol=1e-12)


def test_unfactored_identity_at_k_zero():
    g = Grid2D.square(0, 1, 1 / 8)
    rhs = Field(np.random.default_rng(0).standard_normal(g.shape), g)
    out = solve_unfactored(_op(g, ModelParams(0.3, -0.1), 0.0), rhs)
    np.testing.assert_allclose(out.values, rhs.values, rtol=0, atol=1e-14)


@pytest.mark.parametrize("mu", [(0.0, 0.0), (0.4, -0.7)])
def test_unfactored_matches_dense(mu):
    g = Grid2D.square(0, 9 / 8, 1 / 8)
    assert g.shape == (8, 8)
    op = _op(g, ModelParams(*mu), 0.05)
    rhs = Field(np.random.default_rng(2).standard_normal(g.shape), g)
    x = solve_unfactored(op, rhs, tol=1e-12)
    A = assemble_dense(op, g)
    ref = np.linalg.solve(A, rhs.values.ravel()).reshape(g.shape)
    np.testing.assert_allclose(x.values, ref, rtol=0, atol=1e-9)


def test_unfactored_residual_monotone():
    g = Grid2D.square(0, 4, 1 / 16)
    op = _op(g, ModelParams(), 0.1)
    rhs = Field(np.random.default_rng(3).standard_normal(g.shape), g)
    x, info = solve_unfactored(op, rhs, tol=1e-10, x0=Field.zeros(g), restart=10,
                               return_info=True)
    r = np.array(info.residuals)
    assert info.converged and r[-1] <= 1e-10
    assert np.all(np.diff(r) <= 1e-12)
    res = np.linalg.norm((op(x).values - rhs.values).ravel()) / np.linalg.norm(rhs.values)
    assert res <= 1e-10


def test_unfactored_iteration_failure():
    g = Grid2D.square(0, 4, 1 / 8)
    op = _op(g, ModelParams(), 0.1)
    rhs = Field(np.random.default_rng(3).standard_normal(g.shape), g)
    with pytest.raises(IterationError) as e:
        solve_unfactored(op, rhs, tol=1e-300, max_iter=1)
    assert e.value.residual > 0


@pytest.mark.parametrize("mu", [(0.0, 0.0), (0.0809, 0.0809), (1.5, -0.9)])
def test_spectral_matches_dense(mu):
    g = Grid2D(0, 1.125, 0, 0.75, 1 / 8, 1 / 16)
    k = 0.02
    sp = spectral_solver(g, k, *mu)
    assert sp is not None
    op = _op(g, ModelParams(*mu), k)
    A = assemble_dense(op, g)
    rhs = np.random.default_rng(5).standard_normal(g.shape)
    ref = np.linalg.solve(A, rhs.ravel()).reshape(g.shape)
    np.testing.assert_allclose(sp.solve(rhs), ref, rtol=0, atol=1e-11)


def test_spectral_declines_strong_advection():
    g = Grid2D.square(0, 4, 0.5)
    assert spectral_solver(g, 0.1, 5.0, 0.0) is None
