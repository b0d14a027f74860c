"""Correlated Brownian increments and Euler sub-stepped iterated integrals.

Random streams
--------------
Every path owns a ``numpy.random.Philox`` (counter-based, 64-bit) generator
keyed by ``SeedSequence([master_seed, path_index])``; normals come from
NumPy's ziggurat ``standard_normal``. Path ``p`` of a batch therefore depends
only on ``(master_seed, p)`` and results are reproducible across runs and
independent of how paths are scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError

__all__ = [
    "PathStep",
    "BrownianPath",
    "LevyAreaSample",
    "path_rng",
    "draw_path",
    "draw_fine_path",
    "ito_diagonal",
    "levy_area",
    "levy_area_batch",
    "sub_step_count",
    "write_path_csv",
]


class PathStep(NamedTuple):
    """Standard normal draws of one step; ``z_y_tilde`` is correlated with ``z_x``."""

    z_x: float
    z_y_tilde: float


class LevyAreaSample(NamedTuple):
    a_xy: float
    a_yx: float
    sub_steps: int
    sub_increments: np.ndarray  # shape (sub_steps, 2): columns dW, dB


def path_rng(master_seed, index=0):
    if master_seed is None:
        raise ParameterError("a seed is required")
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def _check_rho(rho):
    if not -1.0 <= rho <= 1.0:
        raise ParameterError(f"correlation {rho} must lie in [-1, 1]")


def sub_step_count(k):
    """Euler sub-steps used to approximate the iterated integrals over one step."""
    if k <= 0:
        raise ParameterError(f"k={k} must be positive")
    return max(1, math.ceil(1.0 / k - 1e-9))


def ito_diagonal(delta_m, k):
    """Exact value of the diagonal iterated integral given its increment."""
    if k <= 0:
        raise ParameterError(f"k={k} must be positive")
    return 0.5 * (delta_m * delta_m - k)


def _exclusive_cumsum(a, axis=-1):
    return np.cumsum(a, axis=axis) - a


def _areas(dw, db):
    w_left = _exclusive_cumsum(dw, axis=-1)
    b_left = _exclusive_cumsum(db, axis=-1)
    return (w_left * db).sum(axis=-1), (b_left * dw).sum(axis=-1)


@dataclass(frozen=True)
class BrownianPath:
    """Per-step normals of a two-driver path, scaled by ``sqrt(k)`` in the schemes.

    When ``sub`` is present it holds the Euler sub-increments ``(dW, dB)`` with
    shape ``(N, M, 2)``; the step normals are then exactly their sums over
    ``sqrt(k)``, so schemes and iterated integrals share one filtration.
    """

    z_x: np.ndarray
    z_y_tilde: np.ndarray
    k: float
    seed: int
    rho_xy: float
    index: int = 0
    sub: np.ndarray | None = None

    def __len__(self):
        return len(self.z_x)

    def __getitem__(self, n):
        return PathStep(float(self.z_x[n]), float(self.z_y_tilde[n]))

    @property
    def steps(self):
        return [self[n] for n in range(len(self))]

    @property
    def sub_steps(self):
        return 0 if self.sub is None else self.sub.shape[1]

    def terminal(self, n_steps=None):
        """Driver values ``(M^x, M^y)`` after ``n_steps`` (default: all)."""
        n = len(self) if n_steps is None else n_steps
        s = math.sqrt(self.k)
        return float(s * self.z_x[:n].sum()), float(s * self.z_y_tilde[:n].sum())

    def levy_areas(self):
        """Iterated integrals ``(int (W-W_t) dB, int (B-B_t) dW)`` of every step."""
        if self.sub is None:
            raise ParameterError("path was drawn without sub-increments")
        return _areas(self.sub[..., 0], self.sub[..., 1])

    def levy(self, n):
        if self.sub is None:
            raise ParameterError("path was drawn without sub-increments")
        a_xy, a_yx = _areas(self.sub[n, :, 0], self.sub[n, :, 1])
        return LevyAreaSample(float(a_xy), float(a_yx), self.sub_steps, self.sub[n].copy())

    def coarsen(self, factor, m_sub=None):
        """Same path observed with ``factor`` times larger steps.

        Step normals combine as ``(z_1 + ... + z_r) / sqrt(r)``; retained
        sub-increments are summed in groups so the coarse path carries
        ``m_sub`` (default ``sub_step_count`` of the coarse step) of them.
        """
        factor = int(factor)
        n = len(self)
        if factor < 1 or n % factor:
            raise ParameterError(f"cannot coarsen {n} steps by {factor}")
        if factor == 1 and m_sub is None:
            return self
        k_c = self.k * factor
        z_x = self.z_x.reshape(-1, factor).sum(axis=1) / math.sqrt(factor)
        z_y = self.z_y_tilde.reshape(-1, factor).sum(axis=1) / math.sqrt(factor)
        sub = None
        if self.sub is not None:
            total = factor * self.sub.shape[1]
            m_c = sub_step_count(k_c) if m_sub is None else int(m_sub)
            if m_c > total or total % m_c:
                raise ParameterError(
                    f"{total} fine sub-increments per coarse step cannot form {m_c} groups"
                )
            sub = self.sub.reshape(n // factor, m_c, total // m_c, 2).sum(axis=2)
            # the sums define the coarse increments exactly
            z_x = sub[..., 0].sum(axis=1) / math.sqrt(k_c)
            z_y = sub[..., 1].sum(axis=1) / math.sqrt(k_c)
        return BrownianPath(z_x, z_y, k_c, self.seed, self.rho_xy, self.index, sub)


def draw_path(n_steps, rho_xy, seed, k=1.0, index=0):
    """``n_steps`` correlated standard normal pairs for path ``index``."""
    if n_steps < 1:
        raise ParameterError(f"n_steps={n_steps} must be at least 1")
    _check_rho(rho_xy)
    g = path_rng(seed, index).standard_normal((n_steps, 2))
    z_x = g[:, 0]
    z_y = rho_xy * z_x + math.sqrt(1.0 - rho_xy * rho_xy) * g[:, 1]
    return BrownianPath(z_x.copy(), z_y, float(k), int(seed), float(rho_xy), int(index))


def draw_fine_path(n_steps, k, rho, seed, index=0, m_sub=None):
    """Path whose step increments are sums of ``m_sub`` Euler sub-increments."""
    if n_steps < 1:
        raise ParameterError(f"n_steps={n_steps} must be at least 1")
    _check_rho(rho)
    m = sub_step_count(k) if m_sub is None else int(m_sub)
    if m < 1:
        raise ParameterError(f"m_sub={m} must be positive")
    g = path_rng(seed, index).standard_normal((n_steps, m, 2))
    s = math.sqrt(k / m)
    sub = np.empty_like(g)
    sub[..., 0] = s * g[..., 0]
    sub[..., 1] = rho * sub[..., 0] + math.sqrt(1.0 - rho * rho) * s * g[..., 1]
    z_x = sub[..., 0].sum(axis=1) / math.sqrt(k)
    z_y = sub[..., 1].sum(axis=1) / math.sqrt(k)
    return BrownianPath(z_x, z_y, float(k), int(seed), float(rho), int(index), sub)


def _bridge(total, g, k):
    # iid N(0, k/m) increments conditioned on their sum
    m = g.shape[-1]
    return total[..., None] / m + math.sqrt(k / m) * (g - g.mean(axis=-1, keepdims=True))


def levy_area_batch(z_x, z_y_tilde, k, m_sub, rho, rng):
    """Vectorised :func:`levy_area` over arrays of step normals.

    Returns ``(a_xy, a_yx, sub)`` with ``sub`` of shape ``(..., m_sub, 2)``.
    """
    if m_sub < 1:
        raise ParameterError(f"m_sub={m_sub} must be positive")
    _check_rho(rho)
    z_x = np.asarray(z_x, dtype=float)
    z_y = np.asarray(z_y_tilde, dtype=float)
    sk = math.sqrt(k)
    dW_tot = sk * z_x
    g = rng.standard_normal(z_x.shape + (m_sub, 2))
    dw = _bridge(dW_tot, g[..., 0], k)
    if abs(rho) == 1.0:
        db = rho * dw
    else:
        c = math.sqrt(1.0 - rho * rho)
        perp_tot = (sk * z_y - rho * dW_tot) / c
        db = rho * dw + c * _bridge(perp_tot, g[..., 1], k)
    a_xy, a_yx = _areas(dw, db)
    return a_xy, a_yx, np.stack([dw, db], axis=-1)


def levy_area(step, k, m_sub, rho, seed):
    """Euler approximation of the iterated integrals over one step.

    The sub-path is a Brownian bridge pinned to the step's increments
    ``sqrt(k) * (z_x, z_y_tilde)``, with ``rho`` the driver correlation.
    """
    a_xy, a_yx, sub = levy_area_batch(
        np.array(step.z_x), np.array(step.z_y_tilde), k, m_sub, rho, path_rng(seed)
    )
    return LevyAreaSample(float(a_xy), float(a_yx), int(m_sub), sub)


def write_path_csv(path, filename, with_levy=None):
    if with_levy is None:
        with_levy = path.sub is not None
    areas = path.levy_areas() if with_levy else None
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["n", "z_x", "z_y_tilde"] + (["a_xy", "a_yx"] if with_levy else [])
        w.writerow(head)
        for n in range(len(path)):
            row = [n, repr(float(path.z_x[n])), repr(float(path.z_y_tilde[n]))]
            if with_levy:
                row += [repr(float(areas[0][n])), repr(float(areas[1][n]))]
            w.writerow(row)
