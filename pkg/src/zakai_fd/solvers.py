"""Linear solvers behind the implicit schemes.

``thomas_solve`` and the batched ``LineFactor`` handle the one-dimensional
factors of the ADI splittings. ``solve_unfactored`` is a restarted GMRES for
the unsplit implicit operator, and ``SpectralSolver`` solves the
constant-coefficient unsplit operator directly with sine transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from . import kernels
from .errors import IterationError, ParameterError, SingularMatrixError
from .model import Field

__all__ = [
    "Tridiag",
    "LineFactor",
    "factor_lines",
    "thomas_solve",
    "solve_unfactored",
    "SolveInfo",
    "SpectralSolver",
    "spectral_solver",
    "assemble_dense",
    "PIVOT_TOL",
]

PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class Tridiag:
    """Tridiagonal matrix; ``lower[0]`` and ``upper[-1]`` are ignored."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    dominant: bool = field(init=False)

    def __post_init__(self):
        lo, d, up = (np.asarray(a, dtype=float) for a in (self.lower, self.diag, self.upper))
        if not lo.shape == d.shape == up.shape or d.ndim != 1:
            raise ParameterError("lower, diag and upper must be 1-D arrays of equal length")
        lo = lo.copy()
        up = up.copy()
        lo[0] = 0.0
        up[-1] = 0.0
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "dominant", bool(np.all(np.abs(d) > np.abs(lo) + np.abs(up))))

    @property
    def n(self):
        return len(self.diag)

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)

    def factor(self, name=None):
        return factor_lines(self.lower, self.diag, self.upper, axis=0, name=name)


@dataclass(frozen=True)
class LineFactor:
    """Eliminated form of a batch of tridiagonal systems along ``axis``.

    Each array is either 1-D (one system shared by every line) or 2-D with
    the shape of the right-hand side.
    """

    lower: np.ndarray
    cp: np.ndarray
    inv: np.ndarray
    axis: int
    dominant: bool = True

    def arrays_for(self, shape):
        out = []
        for a in (self.lower, self.cp, self.inv):
            if a.ndim == 1:
                a = a[:, None] if self.axis == 0 else a[None, :]
            out.append(a)
        return out


def factor_lines(lower, diag, upper, axis=0, name=None):
    """Forward elimination of tridiagonal systems laid out along ``axis``.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``PIVOT_TOL`` times its row scale.
    """
    lo, d, up = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (lower, diag, upper)))
    ndim = d.ndim
    if ndim == 2 and axis == 1:
        lo, d, up = (np.ascontiguousarray(a.T) for a in (lo, d, up))
    n = d.shape[0]
    lo = lo.copy()
    lo[0] = 0.0
    up = up.copy()
    up[-1] = 0.0
    scale = np.abs(lo) + np.abs(d) + np.abs(up)
    dominant = bool(np.all(np.abs(d) > np.abs(lo) + np.abs(up)))
    cp = np.empty_like(d)
    inv = np.empty_like(d)
    prev = np.zeros_like(d[0])
    for i in range(n):
        piv = d[i] - lo[i] * prev
        bad = np.abs(piv) < PIVOT_TOL * scale[i]
        if np.any(bad):
            where = np.flatnonzero(np.atleast_1d(bad))[0]
            p = float(np.atleast_1d(piv)[where])
            raise SingularMatrixError(i, p, name)
        inv[i] = 1.0 / piv
        cp[i] = up[i] * inv[i]
        prev = cp[i]
    if ndim == 2 and axis == 1:
        lo, cp, inv = (np.ascontiguousarray(a.T) for a in (lo, cp, inv))
    return LineFactor(lo, cp, inv, axis, dominant)


def thomas_solve(m, rhs):
    """Solve ``m @ x = rhs`` for a single :class:`Tridiag`."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (m.n,):
        raise ParameterError(f"rhs shape {rhs.shape} does not match n={m.n}")
    f = m.factor()
    return kernels.solve_lines(f, rhs[:, None])[:, 0]


@dataclass
class SolveInfo:
    iterations: int = 0
    residuals: list = field(default_factory=list)  # relative, one per iteration
    converged: bool = False


def _gmres(matvec, b, x0, tol, max_iter, restart, info):
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        info.residuals.append(0.0)
        info.converged = True
        return np.zeros_like(b)
    x = x0.copy()
    r = b - matvec(x)
    beta = np.linalg.norm(r)
    info.residuals.append(beta / bnorm)
    it = 0
    while info.residuals[-1] > tol and it < max_iter:
        m = min(restart, max_iter - it)
        V = np.empty((m + 1, b.size))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        used = 0
        for j in range(m):
            w = matvec(V[j])
            # classical Gram-Schmidt, repeated once for orthogonality
            h = V[: j + 1] @ w
            w -= V[: j + 1].T @ h
            h2 = V[: j + 1] @ w
            w -= V[: j + 1].T @ h2
            H[: j + 1, j] = h + h2
            hn = np.linalg.norm(w)
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            den = math.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / den
            sn[j] = H[j + 1, j] / den
            H[j, j] = den
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            it += 1
            used = j + 1
            info.residuals.append(abs(g[j + 1]) / bnorm)
            if info.residuals[-1] <= tol or hn <= 1e-300:
                break
            V[j + 1] = w / hn
        y = np.linalg.solve(np.triu(H[:used, :used]), g[:used])
        x += V[:used].T @ y
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        # the true residual replaces the recurrence estimate at each restart
        info.residuals[-1] = beta / bnorm
        if beta == 0.0:
            break
    info.iterations = it
    info.converged = info.residuals[-1] <= tol
    return x


def solve_unfactored(apply_op, rhs, tol=1e-10, max_iter=None, x0=None, restart=40,
                     return_info=False):
    """Solve ``apply_op(V) = rhs`` by restarted GMRES.

    Parameters
    ----------
    apply_op : callable
        Maps a Field to a Field on the same grid.
    rhs : Field
    tol : float
        Relative residual target ``||A V - rhs|| <= tol ||rhs||``.
    max_iter : int, optional
        Total inner iterations; default ``10 * (n_x + n_y)``.
    x0 : Field, optional
        Initial guess, default ``rhs``.

    Raises
    ------
    IterationError
        If the tolerance is not met within ``max_iter`` iterations.
    """
    grid = rhs.grid
    shape = grid.shape
    if max_iter is None:
        max_iter = 10 * (grid.n_x + grid.n_y)

    def matvec(v):
        return apply_op(Field(v.reshape(shape), grid)).values.ravel()

    b = rhs.values.ravel()
    start = (rhs if x0 is None else x0).values.ravel().astype(float)
    info = SolveInfo()
    x = _gmres(matvec, b, start, tol, max_iter, restart, info)
    if not info.converged:
        raise IterationError(info.iterations, info.residuals[-1], tol)
    out = Field(x.reshape(shape), grid)
    return (out, info) if return_info else out


class SpectralSolver:
    """Direct solver for ``I + ax Dx + ay Dy - bx Dxx - by Dyy`` with constant weights.

    A diagonal similarity ``r^i`` symmetrises each one-dimensional Toeplitz
    factor, after which the type-I sine transform diagonalises the operator.
    Requires ``|mu| h < 1`` in each direction so that the off-diagonals share
    a sign.
    """

    def __init__(self, shape, k, h_x, h_y, mu_x=0.0, mu_y=0.0):
        self.shape = shape
        lam = np.zeros(shape)
        self._scale = []
        for axis, (n, h, mu) in enumerate(zip(shape, (h_x, h_y), (mu_x, mu_y))):
            lo = -mu * k / (2 * h) - k / (2 * h * h)
            up = mu * k / (2 * h) - k / (2 * h * h)
            if k == 0:
                self._scale.append(np.ones(n))
                continue
            if lo * up <= 0:
                raise ParameterError("sine-transform solver needs |mu| h < 1")
            r = math.sqrt(lo / up)
            if abs(n * math.log(r)) > math.log(1e8):
                raise ParameterError("similarity scaling too ill-conditioned")
            s = -math.sqrt(lo * up)
            p = np.arange(1, n + 1)
            ev = k / (h * h) + 2 * s * np.cos(p * math.pi / (n + 1))
            lam += ev[:, None] if axis == 0 else ev[None, :]
            self._scale.append(r ** (p - (n + 1) / 2))
        self._denom = 1.0 + lam
        self._sx = self._scale[0][:, None]
        self._sy = self._scale[1][None, :]

    def solve(self, values):
        w = values / (self._sx * self._sy)
        w = scipy.fft.dstn(w, type=1, norm="ortho")
        w /= self._denom
        w = scipy.fft.idstn(w, type=1, norm="ortho")
        return w * (self._sx * self._sy)


@lru_cache(maxsize=32)
def _cached_spectral(shape, k, h_x, h_y, mu_x, mu_y):
    return SpectralSolver(shape, k, h_x, h_y, mu_x, mu_y)


def spectral_solver(grid, k, mu_x=0.0, mu_y=0.0):
    """Cached :class:`SpectralSolver`, or ``None`` when it does not apply."""
    try:
        return _cached_spectral(grid.shape, float(k), grid.h_x, grid.h_y, float(mu_x), float(mu_y))
    except ParameterError:
        return None


def assemble_dense(apply_op, grid):
    """Dense matrix of a linear Field operator, column per unit vector."""
    n = grid.n_x * grid.n_y
    A = np.empty((n, n))
    e = np.zeros(n)
    for c in range(n):
        e[c] = 1.0
        A[:, c] = apply_op(Field(e.reshape(grid.shape), grid)).values.ravel()
        e[c] = 0.0
    return A
