"""Time-stepping schemes.

Constant-coefficient model (``ModelParams``): explicit, implicit and ADI
Milstein and a semi-implicit Euler scheme. Variable coefficients: an ADI
Milstein scheme for the general Zakai form, and ADI Milstein / modified
Milstein / Euler schemes for a stochastic-volatility (Heston-type) SPDE.

Every step maps a Field to a new Field and is linear in it. Brownian
increments enter as ``sqrt(k) * Z`` with ``Z`` from a :class:`PathStep`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import GridMismatchError, ParameterError
from .model import Field, ModelParams
from .solvers import factor_lines, solve_unfactored, spectral_solver
from .stencils import apply_fused, dx, dx2, dxy, dy, fused_weights
from .stochastic import LevyAreaSample, PathStep, ito_diagonal

__all__ = [
    "SchemeKind",
    "HestonSpdeParams",
    "CoefficientFields",
    "milstein_rhs_weights",
    "implicit_lhs_weights",
    "step_explicit_milstein",
    "step_implicit_milstein",
    "step_adi_milstein",
    "step_semi_implicit_euler",
    "step_adi_general",
    "step_heston_spde",
    "iterated_integrals",
    "evolve",
]


class SchemeKind(Enum):
    ExplicitMilstein = "explicit-milstein"
    ImplicitMilstein = "implicit-milstein"
    AdiMilstein = "adi-milstein"
    SemiImplicitEuler = "semi-implicit-euler"
    AdiMilsteinGeneral = "adi-milstein-general"
    AdiMilsteinHeston = "adi-milstein-heston"
    AdiMilsteinHestonModified = "adi-milstein-heston-modified"
    AdiEulerHeston = "adi-euler-heston"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        for kind in cls:
            if name in (kind.value, kind.name):
                return kind
        raise ParameterError(f"unknown scheme {name!r}")

    @property
    def is_heston(self):
        return self in (SchemeKind.AdiMilsteinHeston, SchemeKind.AdiMilsteinHestonModified,
                        SchemeKind.AdiEulerHeston)


@dataclass(frozen=True)
class HestonSpdeParams:
    """Coefficients of the stochastic-volatility SPDE.

    ``kappa1``, ``theta1`` and ``xi1`` are the variance mean-reversion speed,
    level and vol-of-vol, ``r1`` the rate; ``rho_11`` and ``rho_21`` scale the
    common noise in the asset and variance directions and ``rho_3`` is the
    correlation of the two common drivers.
    """

    kappa1: float
    theta1: float
    xi1: float
    r1: float
    rho_11: float
    rho_21: float
    rho_3: float

    def __post_init__(self):
        if self.xi1 < 0:
            raise ParameterError(f"xi1={self.xi1} must be non-negative")
        for name in ("rho_11", "rho_21", "rho_3"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ParameterError(f"{name}={v} must lie in [-1, 1]")


# -- constant coefficients ---------------------------------------------------


def milstein_rhs_weights(p, k, h_x, h_y, s):
    """Keyword weights (for :func:`fused_weights`) of the Milstein noise operator."""
    z, zt = s.z_x, s.z_y_tilde
    return dict(
        c0=1.0,
        cx=-math.sqrt(p.rho_x * k) * z / (2 * h_x),
        cy=-math.sqrt(p.rho_y * k) * zt / (2 * h_y),
        gx=p.rho_x * k * (z * z - 1) / (8 * h_x * h_x),
        gy=p.rho_y * k * (zt * zt - 1) / (8 * h_y * h_y),
        d=math.sqrt(p.rho_x * p.rho_y) * k * z * zt / (4 * h_x * h_y),
    )


def implicit_lhs_weights(p, k, h_x, h_y):
    return dict(
        c0=1.0,
        cx=p.mu_x * k / (2 * h_x),
        cy=p.mu_y * k / (2 * h_y),
        cxx=-k / (2 * h_x * h_x),
        cyy=-k / (2 * h_y * h_y),
    )


def step_explicit_milstein(v, p, k, s, backend=None):
    g = v.grid
    w = milstein_rhs_weights(p, k, g.h_x, g.h_y, s)
    w["cx"] -= p.mu_x * k / (2 * g.h_x)
    w["cy"] -= p.mu_y * k / (2 * g.h_y)
    w["cxx"] = k / (2 * g.h_x ** 2)
    w["cyy"] = k / (2 * g.h_y ** 2)
    return Field(apply_fused(v.values, fused_weights(**w), backend), g)


@lru_cache(maxsize=64)
def _adi_factors(n_x, n_y, h_x, h_y, k, mu_x, mu_y):
    out = []
    for axis, (n, h, mu) in enumerate(((n_x, h_x, mu_x), (n_y, h_y, mu_y))):
        lo = np.full(n, -mu * k / (2 * h) - k / (2 * h * h))
        d = np.full(n, 1.0 + k / (h * h))
        up = np.full(n, mu * k / (2 * h) - k / (2 * h * h))
        out.append(factor_lines(lo, d, up, axis=axis, name="xy"[axis]))
    return tuple(out)


def _adi_solve(rhs_values, grid, p, k, backend=None):
    fx, fy = _adi_factors(grid.n_x, grid.n_y, grid.h_x, grid.h_y, float(k), p.mu_x, p.mu_y)
    w = kernels.solve_lines(fx, rhs_values, backend)
    return kernels.solve_lines(fy, w, backend)


def _implicit_solve(rhs, p, k, tol, solver, max_iter, backend):
    g = rhs.grid
    if solver == "spectral":
        sp = spectral_solver(g, k, p.mu_x, p.mu_y)
        if sp is not None:
            return Field(sp.solve(rhs.values), g)
    elif solver != "krylov":
        raise ParameterError(f"unknown solver {solver!r}")
    lhs = fused_weights(**implicit_lhs_weights(p, k, g.h_x, g.h_y))

    def apply_op(f):
        return Field(apply_fused(f.values, lhs, backend), f.grid)

    # the ADI solution differs from the unsplit one by O(k^2): a good start
    x0 = Field(_adi_solve(rhs.values, g, p, k, backend), g)
    return solve_unfactored(apply_op, rhs, tol=tol, max_iter=max_iter, x0=x0)


def step_implicit_milstein(v, p, k, s, tol=1e-10, solver="krylov", max_iter=None, backend=None):
    """Milstein step with the unsplit implicit drift-diffusion operator.

    ``solver`` is ``"krylov"`` (restarted GMRES to relative residual ``tol``)
    or ``"spectral"`` (direct sine-transform solve, falling back to GMRES
    where it does not apply).
    """
    g = v.grid
    w = fused_weights(**milstein_rhs_weights(p, k, g.h_x, g.h_y, s))
    rhs = Field(apply_fused(v.values, w, backend), g)
    return _implicit_solve(rhs, p, k, tol, solver, max_iter, backend)


def step_adi_milstein(v, p, k, s, backend=None):
    """Milstein step with the drift-diffusion operator split into x and y factors.

    The x-factor is inverted first, then the y-factor.
    """
    g = v.grid
    w = fused_weights(**milstein_rhs_weights(p, k, g.h_x, g.h_y, s))
    rhs = apply_fused(v.values, w, backend)
    return Field(_adi_solve(rhs, g, p, k, backend), g)


def step_semi_implicit_euler(v, p, k, s, tol=1e-10, solver="krylov", max_iter=None, backend=None):
    """Euler step: implicit drift and diffusion, explicit mixed term and noise."""
    g = v.grid
    w = fused_weights(
        c0=1.0,
        cx=-math.sqrt(p.rho_x * k) * s.z_x / (2 * g.h_x),
        cy=-math.sqrt(p.rho_y * k) * s.z_y_tilde / (2 * g.h_y),
        d=math.sqrt(p.rho_x * p.rho_y) * p.rho_xy * k / (4 * g.h_x * g.h_y),
    )
    rhs = Field(apply_fused(v.values, w, backend), g)
    return _implicit_solve(rhs, p, k, tol, solver, max_iter, backend)


# -- general Zakai form -------------------------------------------------------


def _extend(values):
    """Boundary-inclusive copy with zero Dirichlet ring."""
    e = np.zeros((values.shape[0] + 2, values.shape[1] + 2))
    e[1:-1, 1:-1] = values
    return e


@dataclass(eq=False)
class CoefficientFields:
    """Node values of ``a`` (2x2), ``b`` (2) and ``gamma`` (2 x m) on the full mesh.

    Arrays are stored with the boundary-inclusive shape ``(n_x+2, n_y+2)`` in
    their last two axes so that nested difference operators can be composed
    on the extended grid. The drivers are those of the path passed to the
    step; ``a`` must already contain any contribution from their correlation.
    """

    grid: object
    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    _factors: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        full = (self.grid.n_x + 2, self.grid.n_y + 2)
        self.a = np.broadcast_to(np.asarray(self.a, dtype=float), (2, 2) + full)
        self.b = np.broadcast_to(np.asarray(self.b, dtype=float), (2,) + full)
        gam = np.asarray(self.gamma, dtype=float)
        if gam.ndim < 2 or gam.shape[0] != 2:
            raise ParameterError("gamma must have shape (2, m, ...)")
        self.gamma = np.broadcast_to(gam, gam.shape[:2] + full)

    @property
    def m(self):
        return self.gamma.shape[1]

    @classmethod
    def constant(cls, grid, a, b, gamma):
        a, b, gamma = (np.asarray(t, dtype=float) for t in (a, b, gamma))
        return cls(grid, a[..., None, None], b[..., None, None], gamma[..., None, None])

    @classmethod
    def from_functions(cls, grid, a_fn, b_fn, gamma_fn):
        """Evaluate ``fn(X, Y)`` on the full mesh; each must return the stacked array."""
        X, Y = np.meshgrid(grid.x_full, grid.y_full, indexing="ij")
        return cls(grid, a_fn(X, Y), b_fn(X, Y), gamma_fn(X, Y))

    @classmethod
    def from_model(cls, grid, p):
        """Coefficients reproducing the constant model with the path's correlated drivers."""
        c = math.sqrt(p.rho_x * p.rho_y) * p.rho_xy
        return cls.constant(
            grid,
            [[1.0, c], [c, 1.0]],
            [p.mu_x, p.mu_y],
            [[math.sqrt(p.rho_x), 0.0], [0.0, math.sqrt(p.rho_y)]],
        )

    def factors(self, k):
        key = float(k)
        if key not in self._factors:
            g = self.grid
            out = []
            for axis, h in ((0, g.h_x), (1, g.h_y)):
                aii = self.a[axis, axis]
                bi = self.b[axis]
                sl_c = (slice(1, -1), slice(1, -1))
                if axis == 0:
                    sl_m, sl_p = (slice(0, -2), slice(1, -1)), (slice(2, None), slice(1, -1))
                else:
                    sl_m, sl_p = (slice(1, -1), slice(0, -2)), (slice(1, -1), slice(2, None))
                lo = -(k / (2 * h)) * bi[sl_m] - (k / (2 * h * h)) * aii[sl_m]
                d = 1.0 + (k / (h * h)) * aii[sl_c]
                up = (k / (2 * h)) * bi[sl_p] - (k / (2 * h * h)) * aii[sl_p]
                out.append(factor_lines(lo, d, up, axis=axis, name="xy"[axis]))
            self._factors[key] = tuple(out)
        return self._factors[key]


def iterated_integrals(s, k, levy):
    """Matrix ``I[p, l]`` of the iterated integrals of ``M_p`` against ``M_l``.

    Diagonal entries are exact; the off-diagonal ones come from ``levy``.
    """
    dmx = math.sqrt(k) * s.z_x
    dmy = math.sqrt(k) * s.z_y_tilde
    return np.array([
        [ito_diagonal(dmx, k), levy.a_xy],
        [levy.a_yx, ito_diagonal(dmy, k)],
    ])


def step_adi_general(v, coeffs, k, s, levy, dM=None, backend=None):
    """ADI Milstein step for the general Zakai form with node-wise coefficients.

    Parameters
    ----------
    v : Field
    coeffs : CoefficientFields
    k : float
    s : PathStep
        Standard normals of the two drivers; ignored when ``dM`` is given.
    levy : LevyAreaSample or array_like
        Either a sample for the two drivers or the full ``(m, m)`` matrix
        ``I[p, l]`` of iterated integrals.
    dM : array_like, optional
        Driver increments, needed when ``m != 2``.
    """
    g = v.grid
    if coeffs.grid != g:
        raise GridMismatchError("coefficient grid differs from the field grid")
    if dM is None:
        dM = math.sqrt(k) * np.array([s.z_x, s.z_y_tilde])
    dM = np.asarray(dM, dtype=float)
    m = coeffs.m
    if isinstance(levy, LevyAreaSample):
        I = iterated_integrals(s, k, levy)
    else:
        I = np.asarray(levy, dtype=float)
    if dM.shape != (m,) or I.shape != (m, m):
        raise ParameterError(f"driver count mismatch: gamma has m={m}")
    hx, hy = g.h_x, g.h_y
    E = _extend(v.values)
    gam = coeffs.gamma

    def G(l, A):
        return dx(gam[0, l] * A) / (2 * hx) + dy(gam[1, l] * A) / (2 * hy)

    rhs = E + (k / (8 * hx * hy)) * (dxy(coeffs.a[0, 1] * E) + dxy(coeffs.a[1, 0] * E))
    GE = [G(p, E) for p in range(m)]
    for l in range(m):
        inner = -dM[l] * E
        for p in range(m):
            if I[p, l] != 0.0:
                inner = inner + I[p, l] * GE[p]
        rhs += G(l, inner)
    fx, fy = coeffs.factors(k)
    w = kernels.solve_lines(fx, rhs[1:-1, 1:-1], backend)
    return Field(kernels.solve_lines(fy, w, backend), g)


# -- stochastic-volatility SPDE ----------------------------------------------


@lru_cache(maxsize=64)
def _heston_factors(grid, hp, k):
    hx, hy = grid.h_x, grid.h_y
    y = grid.y
    a1x = hp.r1 - y / 2 - hp.xi1 * hp.rho_3 * hp.rho_11 * hp.rho_21
    a1y = hp.kappa1 * (hp.theta1 - y) - hp.xi1 ** 2
    shape = grid.shape
    lo = -(k / (2 * hx)) * a1x - (k / (2 * hx * hx)) * y
    d = 1.0 + (k / (hx * hx)) * y
    up = (k / (2 * hx)) * a1x - (k / (2 * hx * hx)) * y
    fx = factor_lines(*(np.broadcast_to(t, shape) for t in (lo, d, up)), axis=0, name="x")
    dyy = hp.xi1 ** 2 * y
    lo = -(k / (2 * hy)) * a1y - (k / (2 * hy * hy)) * dyy
    d = 1.0 + (k / (hy * hy)) * dyy
    up = (k / (2 * hy)) * a1y - (k / (2 * hy * hy)) * dyy
    fy = factor_lines(lo, d, up, axis=1, name="y")
    return fx, fy


def step_heston_spde(u, hp, k, s, levy, variant, backend=None):
    """One ADI step of the stochastic-volatility SPDE.

    ``variant`` selects full Milstein (needs ``levy``, a LevyAreaSample or
    the float ``int (W - W_t) dB``), modified Milstein (that integral
    dropped) or Euler (all Milstein corrections dropped). ``s`` carries the
    normals of the two common drivers, whose correlation is ``hp.rho_3``.
    """
    variant = SchemeKind.parse(variant)
    if not variant.is_heston:
        raise ParameterError(f"{variant} is not a stochastic-volatility variant")
    g = u.grid
    if g.y_min < 0:
        raise ParameterError("variance grid must lie in y >= 0")
    hx, hy = g.h_x, g.h_y
    z, zt = s.z_x, s.z_y_tilde
    sk = math.sqrt(k)
    U = u.values
    Y = g.y[None, :]
    sY = np.sqrt(np.maximum(Y, 0.0))
    sY_full = np.sqrt(np.maximum(g.y_full, 0.0))[None, :]
    c = hp.xi1 * hp.rho_11 * hp.rho_21

    DxU = dx(U)
    rhs = (1.0 + hp.kappa1 * k) * U - (sk * z / (2 * hx)) * hp.rho_11 * sY * DxU
    Ys = sY_full * _extend(U)
    DyYs = dy(Ys)
    rhs -= (sk * zt / (2 * hy)) * hp.xi1 * hp.rho_21 * DyYs[1:-1, 1:-1]

    if variant is SchemeKind.AdiEulerHeston:
        rhs += (k / (4 * hx * hy)) * c * hp.rho_3 * Y * dxy(U)
    else:
        rhs += (k * (z * z - 1) / (8 * hx * hx)) * hp.rho_11 ** 2 * Y * dx2(U)
        rhs -= (k / (4 * hx)) * c * hp.rho_3 * DxU
        rhs += (k / (4 * hx)) * c * z * zt * (DxU + Y * dxy(U) / hy)
        nested = dy(sY_full * DyYs)[1:-1, 1:-1]
        rhs += (k * (zt * zt - 1) / (8 * hy * hy)) * (hp.xi1 * hp.rho_21) ** 2 * nested
        if variant is SchemeKind.AdiMilsteinHeston:
            if levy is None:
                raise ParameterError("full Milstein variant needs the iterated integral")
            i_wb = levy.a_xy if isinstance(levy, LevyAreaSample) else float(levy)
            rhs += (i_wb / (4 * hx)) * c * DxU

    fx, fy = _heston_factors(g, hp, float(k))
    w = kernels.solve_lines(fx, rhs, backend)
    return Field(kernels.solve_lines(fy, w, backend), g)


# -- full horizon -------------------------------------------------------------


def evolve(initial, kind, params, tg, path, tol=1e-10, solver="krylov", backend=None,
           observer=None, max_iter=None):
    """Apply ``tg.N`` steps of ``kind`` along ``path`` and return ``V^N``.

    ``params`` is a ModelParams, a CoefficientFields (general scheme) or a
    HestonSpdeParams. Schemes that need iterated integrals read them from
    the path's retained sub-increments. ``observer(n, field)``, if given,
    is called after each step. ``tol``, ``solver`` and ``max_iter`` are
    passed to the unsplit implicit solves.
    """
    kind = SchemeKind.parse(kind)
    N = tg.N
    if N == 0:
        return initial
    k = tg.k
    if len(path) < N:
        raise ParameterError(f"path has {len(path)} steps, need {N}")
    needs_levy = kind in (SchemeKind.AdiMilsteinGeneral, SchemeKind.AdiMilsteinHeston)
    areas = None
    if needs_levy:
        if path.sub is None:
            raise ParameterError(f"{kind.value} needs a path with sub-increments")
        if abs(path.k - k) > 1e-12 * k:
            raise ParameterError(f"path step {path.k} differs from k={k}")
        areas = path.levy_areas()
    if kind.is_heston:
        if not isinstance(params, HestonSpdeParams):
            raise ParameterError("stochastic-volatility schemes need HestonSpdeParams")
    elif kind is SchemeKind.AdiMilsteinGeneral:
        if not isinstance(params, CoefficientFields):
            raise ParameterError("the general scheme needs CoefficientFields")
    elif not isinstance(params, ModelParams):
        raise ParameterError(f"{kind.value} needs ModelParams")

    v = initial
    for n in range(N):
        s = PathStep(float(path.z_x[n]), float(path.z_y_tilde[n]))
        if kind is SchemeKind.ExplicitMilstein:
            v = step_explicit_milstein(v, params, k, s, backend)
        elif kind is SchemeKind.ImplicitMilstein:
            v = step_implicit_milstein(v, params, k, s, tol, solver, max_iter, backend)
        elif kind is SchemeKind.AdiMilstein:
            v = step_adi_milstein(v, params, k, s, backend)
        elif kind is SchemeKind.SemiImplicitEuler:
            v = step_semi_implicit_euler(v, params, k, s, tol, solver, max_iter, backend)
        elif kind is SchemeKind.AdiMilsteinGeneral:
            lv = LevyAreaSample(float(areas[0][n]), float(areas[1][n]), path.sub_steps, None)
            v = step_adi_general(v, params, k, s, lv, backend=backend)
        else:
            i_wb = float(areas[0][n]) if areas is not None else None
            v = step_heston_spde(v, params, k, s, i_wb, kind, backend)
        if observer is not None:
            observer(n + 1, v)
    return v
