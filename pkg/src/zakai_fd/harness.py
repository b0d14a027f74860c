"""Monte Carlo error studies: convergence rates, divergence, proxy errors, cost.

All studies are reproducible from ``(configuration, master_seed)``: path
``l`` uses the stream ``(master_seed, l)`` and per-path results are reduced
in path order, so running paths on several threads does not change the
numbers.

Slopes are least-squares fits of ``log2(error)`` against ``log2`` of the
refined quantity (``h`` or ``k``), so a convergent method of order ``q``
reports ``+q``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import AlignmentError, GridMismatchError, ParameterError
from .exact import exact_field
from .kernels import BACKEND
from .model import Field, Grid2D, ModelParams, TimeGrid, dirac_initial, gaussian_initial
from .schemes import HestonSpdeParams, SchemeKind, evolve
from .stochastic import draw_fine_path, draw_path, sub_step_count

__all__ = [
    "LevelRecord",
    "ExperimentResult",
    "fit_slope",
    "l2_error",
    "mc_l2_error",
    "mc_squared_errors",
    "convergence_in_h",
    "convergence_in_k",
    "divergence_study",
    "correlation_sweep",
    "restrict_to_coarse",
    "proxy_error_h",
    "proxy_error_k",
    "proxy_convergence_h",
    "proxy_convergence_k",
    "cost_study",
    "heston_grid",
    "write_manifest",
    "artifact_version",
    "MODEL_PRESET",
    "HESTON_PRESET",
]

# constant-coefficient test problem: parameters, horizon, Dirac location, box
MODEL_PRESET = dict(
    params=ModelParams(mu_x=0.0809, mu_y=0.0809, rho_x=0.2, rho_y=0.2, rho_xy=0.45),
    T=1.0, x0=2.0, y0=2.0, domain=(-8.0, 12.0, -8.0, 12.0),
)

# stochastic-volatility test problem
HESTON_PRESET = dict(
    params=HestonSpdeParams(kappa1=2.0, theta1=0.4, xi1=0.5, r1=0.05,
                            rho_11=0.3, rho_21=0.2, rho_3=0.5),
    T=1.0, x0=2.0, y0=1.4, domain=(-3.0, 7.0, 0.0, 1.5),
    h_x=0.625, h_y=0.025, k=0.25,
)

_EPS = np.finfo(float).eps


@dataclass
class LevelRecord:
    h_x: float
    h_y: float
    k: float
    error: float
    seconds: float
    stderr: float = 0.0
    ref_norm: float = 0.0


@dataclass
class ExperimentResult:
    """Per-level errors and the fitted convergence slope.

    ``refine`` names the quantity on the slope's abscissa (``"h"`` for
    ``h_x`` or ``"k"``).
    """

    levels: list
    fitted_slope: float
    slope_stderr: float
    refine: str = "h"
    used: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def errors(self):
        return np.array([lv.error for lv in self.levels])

    def abscissa(self):
        return np.array([lv.h_x if self.refine == "h" else lv.k for lv in self.levels])

    def refit(self, idx):
        """Slope over a subset of levels (indices into ``levels``)."""
        x = self.abscissa()[idx]
        e = self.errors[idx]
        return fit_slope(x, e)[:2]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "h_x", "h_y", "k", "error", "seconds"])
            for i, lv in enumerate(self.levels):
                w.writerow([i, lv.h_x, lv.h_y, lv.k, repr(lv.error), f"{lv.seconds:.6f}"])

    def to_dict(self):
        return {
            "levels": [asdict(lv) for lv in self.levels],
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "refine": self.refine,
            "used": list(self.used),
            "meta": self.meta,
        }


def fit_slope(x, errors, floors=None):
    """Least-squares slope of ``log2(errors)`` on ``log2(x)``.

    Levels whose error is below ``floors`` (same length, optional) are
    dropped. Returns ``(slope, stderr, used_indices)``; ``stderr`` is zero
    when only two points remain.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = (e > 0) & np.isfinite(e)
    if floors is not None:
        ok &= e >= np.asarray(floors, dtype=float)
    idx = np.flatnonzero(ok)
    if len(idx) < 2:
        return float("nan"), float("nan"), idx.tolist()
    X = np.log2(x[idx])
    Y = np.log2(e[idx])
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    slope = float(coef[0])
    n = len(idx)
    if n > 2:
        resid = Y - A @ coef
        s2 = float(resid @ resid) / (n - 2)
        se = math.sqrt(s2 / float(((X - X.mean()) ** 2).sum()))
    else:
        se = 0.0
    return slope, se, idx.tolist()


def _result(levels, refine, meta):
    x = [lv.h_x if refine == "h" else lv.k for lv in levels]
    floors = [1e3 * _EPS * lv.ref_norm for lv in levels]
    slope, se, used = fit_slope(x, [lv.error for lv in levels], floors)
    return ExperimentResult(levels, slope, se, refine, used, meta)


def l2_error(num, ref):
    """Discrete L2 distance ``sqrt(sum h_x h_y (num - ref)^2)``."""
    if num.grid != ref.grid:
        raise GridMismatchError("fields live on different grids")
    g = num.grid
    d = num.values - ref.values
    return math.sqrt(float((d * d).sum()) * g.h_x * g.h_y)


def _norm(f):
    return math.sqrt(float((f.values ** 2).sum()) * f.grid.h_x * f.grid.h_y)


def _map_paths(fn, L, threads):
    if threads is None or threads == 1 or L == 1:
        return [fn(l) for l in range(L)]
    workers = None if threads == 0 else threads
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(L)))


def _initial(kind_init, grid, p, x0, y0):
    if kind_init == "dirac":
        return dirac_initial(grid, x0, y0), 0.0
    if kind_init == "gaussian":
        # the exact solution is then the Dirac solution one time unit later
        return gaussian_initial(grid, p, x0, y0), 1.0
    raise ParameterError(f"unknown initial datum {kind_init!r}")


def _model_grid(h_x, h_y, domain):
    return Grid2D(domain[0], domain[1], domain[2], domain[3], h_x, h_y)


def mc_squared_errors(kind, p, grid, tg, L, master_seed, x0=2.0, y0=2.0, initial="dirac",
                      solver="spectral", threads=1, paths=None):
    """Per-path squared L2 errors against the exact solution on the same path.

    ``paths`` optionally supplies the Brownian paths (one per sample);
    otherwise path ``l`` is drawn from stream ``(master_seed, l)``.
    """
    v0, t_shift = _initial(initial, grid, p, x0, y0)

    def one(l):
        path = paths[l] if paths is not None else draw_path(tg.N, p.rho_xy, master_seed, tg.k, index=l)
        v = evolve(v0, kind, p, tg, path, solver=solver)
        m_x, m_y = path.terminal(tg.N)
        ref = exact_field(grid, tg.T + t_shift, p, m_x, m_y, x0, y0)
        return l2_error(v, ref) ** 2, _norm(ref)

    out = _map_paths(one, L, threads)
    return np.array([o[0] for o in out]), float(np.mean([o[1] for o in out]))


def mc_l2_error(kind, p, grid, tg, L, master_seed, x0=2.0, y0=2.0, initial="dirac",
                solver="spectral", threads=1):
    """Root of the path-averaged squared L2 error, ``(sum h_x h_y E_L|V - v|^2)^(1/2)``."""
    if L < 1:
        raise ParameterError("L must be at least 1")
    sq, _ = mc_squared_errors(kind, p, grid, tg, L, master_seed, x0, y0, initial, solver, threads)
    return math.sqrt(float(sq.mean()))


def _level_from_sq(sq, h_x, h_y, k, seconds, ref_norm):
    m = float(sq.mean())
    err = math.sqrt(m)
    # delta method on the sample mean of the squared errors
    se = float(sq.std(ddof=1) / math.sqrt(len(sq)) / (2 * err)) if len(sq) > 1 and err > 0 else 0.0
    return LevelRecord(h_x, h_y, k, err, seconds, se, ref_norm)


def convergence_in_h(kind, p, k_fixed, h_levels, L, seed, T=1.0, x0=2.0, y0=2.0,
                     domain=(-8.0, 12.0, -8.0, 12.0), initial="dirac", solver="spectral",
                     threads=1):
    """Errors for ``h = h_x = h_y`` in ``h_levels`` at fixed ``k``; all levels share the paths."""
    kind = SchemeKind.parse(kind)
    tg = TimeGrid.from_step(T, k_fixed)
    paths = [draw_path(tg.N, p.rho_xy, seed, tg.k, index=l) for l in range(L)]
    levels = []
    for h in h_levels:
        g = _model_grid(h, h, domain)
        t0 = time.perf_counter()
        sq, rn = mc_squared_errors(kind, p, g, tg, L, seed, x0, y0, initial, solver, threads, paths)
        levels.append(_level_from_sq(sq, h, h, tg.k, time.perf_counter() - t0, rn))
    meta = dict(study="convergence_in_h", kind=kind.value, params=asdict(p), k=tg.k, T=T,
                L=L, seed=seed, domain=list(domain), initial=initial, x0=x0, y0=y0)
    return _result(levels, "h", meta)


def convergence_in_k(kind, p, h_fixed, k_levels, L, seed, T=1.0, x0=2.0, y0=2.0,
                     domain=(-8.0, 12.0, -8.0, 12.0), initial="dirac", solver="spectral",
                     threads=1):
    """Errors for each ``k`` in ``k_levels`` at fixed ``h``.

    Coarse paths are obtained from the finest one by summing normals, so all
    levels see the same Brownian motion.
    """
    kind = SchemeKind.parse(kind)
    grids = [TimeGrid.from_step(T, k) for k in k_levels]
    finest = max(grids, key=lambda t: t.N)
    fine_paths = [draw_path(finest.N, p.rho_xy, seed, finest.k, index=l) for l in range(L)]
    g = _model_grid(h_fixed, h_fixed, domain)
    levels = []
    for tg in grids:
        r = finest.N // tg.N
        if r * tg.N != finest.N:
            raise ParameterError("timestep levels must nest")
        paths = [fp.coarsen(r) for fp in fine_paths]
        t0 = time.perf_counter()
        sq, rn = mc_squared_errors(kind, p, g, tg, L, seed, x0, y0, initial, solver, threads, paths)
        levels.append(_level_from_sq(sq, h_fixed, h_fixed, tg.k, time.perf_counter() - t0, rn))
    meta = dict(study="convergence_in_k", kind=kind.value, params=asdict(p), h=h_fixed, T=T,
                L=L, seed=seed, domain=list(domain), initial=initial, x0=x0, y0=y0)
    return _result(levels, "k", meta)


def divergence_study(p, k_fixed, h_levels, initial="dirac", seed=0, h_y=None, T=1.0,
                     x0=2.0, y0=2.0, domain=(-8.0, 12.0, -8.0, 12.0),
                     kind=SchemeKind.AdiMilstein, path_index=0):
    """Single-path L2 error as ``h_x`` shrinks with a large fixed ``k``.

    ``h_y`` defaults to ``h_x``; pass a value to hold it fixed.
    """
    kind = SchemeKind.parse(kind)
    tg = TimeGrid.from_step(T, k_fixed)
    path = draw_path(tg.N, p.rho_xy, seed, tg.k, index=path_index)
    levels = []
    for h in h_levels:
        hy = h if h_y is None else h_y
        g = _model_grid(h, hy, domain)
        t0 = time.perf_counter()
        sq, rn = mc_squared_errors(kind, p, g, tg, 1, seed, x0, y0, initial, "spectral", 1, [path])
        levels.append(_level_from_sq(sq, h, hy, tg.k, time.perf_counter() - t0, rn))
    meta = dict(study="divergence", kind=kind.value, params=asdict(p), k=tg.k, T=T, seed=seed,
                initial=initial, h_y=h_y, domain=list(domain), x0=x0, y0=y0, path_index=path_index)
    return _result(levels, "h", meta)


def correlation_sweep(cells, h, k, seed, mu=(0.0809, 0.0809), T=1.0, x0=2.0, y0=2.0,
                      domain=(-8.0, 12.0, -8.0, 12.0), kind=SchemeKind.AdiMilstein, path_index=0):
    """Single fixed-path L2 error for every ``(rho_x, rho_y, rho_xy)`` in ``cells``.

    The underlying independent normals are the same for every cell.
    """
    kind = SchemeKind.parse(kind)
    tg = TimeGrid.from_step(T, k)
    g = _model_grid(h, h, domain)
    rows = []
    for rx, ry, rxy in cells:
        p = ModelParams(mu[0], mu[1], rx, ry, rxy)
        path = draw_path(tg.N, rxy, seed, tg.k, index=path_index)
        sq, _ = mc_squared_errors(kind, p, g, tg, 1, seed, x0, y0, "dirac", "spectral", 1, [path])
        rows.append(dict(rho_x=rx, rho_y=ry, rho_xy=rxy, error=math.sqrt(float(sq[0]))))
    return rows


# -- stochastic-volatility proxies ------------------------------------------


def heston_grid(h_x, h_y, domain=None):
    d = HESTON_PRESET["domain"] if domain is None else domain
    return Grid2D(d[0], d[1], d[2], d[3], h_x, h_y)


def restrict_to_coarse(fine, coarse_grid):
    """Values of ``fine`` at the nodes of ``coarse_grid`` (node ``2i`` to ``i``)."""
    fg, cg = fine.grid, coarse_grid
    same_box = (fg.x_min, fg.x_max, fg.y_min, fg.y_max) == (cg.x_min, cg.x_max, cg.y_min, cg.y_max)
    nested = (
        math.isclose(2 * fg.h_x, cg.h_x, rel_tol=1e-12)
        and math.isclose(2 * fg.h_y, cg.h_y, rel_tol=1e-12)
        and fg.n_x == 2 * cg.n_x + 1
        and fg.n_y == 2 * cg.n_y + 1
    )
    if not (same_box and nested):
        raise AlignmentError("fine grid does not nest the coarse grid node-for-node")
    return Field(fine.values[1::2, 1::2], cg)


def _heston_path(kind, N, k, hp, seed, index, m_sub=None):
    if kind is SchemeKind.AdiMilsteinHeston:
        return draw_fine_path(N, k, hp.rho_3, seed, index=index, m_sub=m_sub)
    return draw_path(N, hp.rho_3, seed, k, index=index)


def proxy_error_h(kind, k_fixed, h_coarse, L, seed, hp=None, T=None, x0=None, y0=None,
                  domain=None, threads=1):
    """Coupled difference between meshes ``h`` and ``h/2`` at one ``k``.

    ``h_coarse`` is the pair ``(h_x, h_y)`` of the coarse mesh. Both runs use
    the same path for each sample.
    """
    kind = SchemeKind.parse(kind)
    hp = HESTON_PRESET["params"] if hp is None else hp
    T = HESTON_PRESET["T"] if T is None else T
    x0 = HESTON_PRESET["x0"] if x0 is None else x0
    y0 = HESTON_PRESET["y0"] if y0 is None else y0
    hx, hy = h_coarse
    gc = heston_grid(hx, hy, domain)
    gf = heston_grid(hx / 2, hy / 2, domain)
    tg = TimeGrid.from_step(T, k_fixed)
    uc0 = dirac_initial(gc, x0, y0)
    uf0 = dirac_initial(gf, x0, y0)

    def one(l):
        path = _heston_path(kind, tg.N, tg.k, hp, seed, l)
        uc = evolve(uc0, kind, hp, tg, path)
        uf = evolve(uf0, kind, hp, tg, path)
        return l2_error(restrict_to_coarse(uf, gc), uc) ** 2

    sq = np.array(_map_paths(one, L, threads))
    return math.sqrt(float(sq.mean()))


def proxy_error_k(kind, h_fixed, k_coarse, L, seed, hp=None, T=None, x0=None, y0=None,
                  domain=None, threads=1):
    """Coupled difference between steps ``k`` and ``k/2`` on one mesh.

    The path is drawn at ``k/2``; the coarse run uses its pairwise sums and,
    for full Milstein, iterated integrals rebuilt from the same
    sub-increments.
    """
    kind = SchemeKind.parse(kind)
    hp = HESTON_PRESET["params"] if hp is None else hp
    T = HESTON_PRESET["T"] if T is None else T
    x0 = HESTON_PRESET["x0"] if x0 is None else x0
    y0 = HESTON_PRESET["y0"] if y0 is None else y0
    g = heston_grid(h_fixed[0], h_fixed[1], domain)
    tc = TimeGrid.from_step(T, k_coarse)
    tf = TimeGrid(T, 2 * tc.N)
    u0 = dirac_initial(g, x0, y0)
    m_c = sub_step_count(tc.k)

    def one(l):
        fine = _heston_path(kind, tf.N, tf.k, hp, seed, l)
        coarse = fine.coarsen(2, m_sub=m_c if fine.sub is not None else None)
        uc = evolve(u0, kind, hp, tc, coarse)
        uf = evolve(u0, kind, hp, tf, fine)
        return l2_error(uf, uc) ** 2

    sq = np.array(_map_paths(one, L, threads))
    return math.sqrt(float(sq.mean()))


def proxy_convergence_h(kind, k_fixed, h_levels, L, seed, hp=None, threads=1, **kw):
    """h-proxy at each coarse mesh ``(h_x, h_y)`` in ``h_levels``; slope against ``h_x``."""
    kind = SchemeKind.parse(kind)
    levels = []
    for hx, hy in h_levels:
        t0 = time.perf_counter()
        e = proxy_error_h(kind, k_fixed, (hx, hy), L, seed, hp, threads=threads, **kw)
        levels.append(LevelRecord(hx, hy, k_fixed, e, time.perf_counter() - t0))
    meta = dict(study="proxy_h", kind=kind.value, k=k_fixed, L=L, seed=seed,
                params=asdict(hp or HESTON_PRESET["params"]))
    slope, se, used = fit_slope([lv.h_x for lv in levels], [lv.error for lv in levels])
    return ExperimentResult(levels, slope, se, "h", used, meta)


def proxy_convergence_k(kind, h_fixed, k_levels, L, seed, hp=None, threads=1, **kw):
    kind = SchemeKind.parse(kind)
    levels = []
    for k in k_levels:
        t0 = time.perf_counter()
        e = proxy_error_k(kind, h_fixed, k, L, seed, hp, threads=threads, **kw)
        levels.append(LevelRecord(h_fixed[0], h_fixed[1], k, e, time.perf_counter() - t0))
    meta = dict(study="proxy_k", kind=kind.value, h=list(h_fixed), L=L, seed=seed,
                params=asdict(hp or HESTON_PRESET["params"]))
    slope, se, used = fit_slope([lv.k for lv in levels], [lv.error for lv in levels])
    return ExperimentResult(levels, slope, se, "k", used, meta)


def cost_study(kind_list, level_count, seed, first_level=0, hp=None, repeats=1):
    """Wall time to simulate one path (noise plus scheme) per refinement level.

    Level ``l`` uses ``k = k0 / 4^l`` and ``h = h0 / 2^l`` from the
    stochastic-volatility preset. Each timing is the minimum over ``repeats``.
    Returns rows ``{kind, level, h_x, h_y, k, seconds}``.
    """
    hp = HESTON_PRESET["params"] if hp is None else hp
    pre = HESTON_PRESET
    rows = []
    for kind in kind_list:
        kind = SchemeKind.parse(kind)
        for lev in range(first_level, first_level + level_count):
            hx, hy = pre["h_x"] / 2 ** lev, pre["h_y"] / 2 ** lev
            tg = TimeGrid.from_step(pre["T"], pre["k"] / 4 ** lev)
            g = heston_grid(hx, hy)
            u0 = dirac_initial(g, pre["x0"], pre["y0"])
            best = math.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                path = _heston_path(kind, tg.N, tg.k, hp, seed, 0)
                evolve(u0, kind, hp, tg, path)
                best = min(best, time.perf_counter() - t0)
            rows.append(dict(kind=kind.value, level=lev, h_x=hx, h_y=hy, k=tg.k, seconds=best))
    return rows


# -- provenance -----------------------------------------------------------------


def artifact_version():
    """Package version plus the source revision when run from a checkout."""
    rev = ""
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0:
            rev = "+" + out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"zakai_fd-{__version__}{rev}"


def write_manifest(path, config, seed, extra=None):
    doc = {
        "version": artifact_version(),
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": seed,
        "config": config,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=str)
    return doc
