"""Finite-difference operators on fields with zero values beyond the interior.

None of the operators divide by the mesh width; the schemes carry all
scaling. The array-level functions (``dx``, ``dy``, ...) act on any 2-D array
and treat out-of-range neighbours as zero, so applying them to a
boundary-inclusive array composes operators on the extended grid.
"""

import numpy as np

from . import kernels
from .model import Field

__all__ = [
    "dx", "dy", "dxx", "dyy", "dxy", "dx2", "dy2",
    "apply_dx", "apply_dy", "apply_dxx", "apply_dyy", "apply_dxy",
    "apply_dx2", "apply_dy2",
    "fused_weights", "apply_fused",
]


def _shift(a, di, dj):
    """``out[i, j] = a[i + di, j + dj]`` with zeros outside."""
    out = np.zeros_like(a)
    nx, ny = a.shape
    src_i = slice(max(di, 0), nx + min(di, 0))
    dst_i = slice(max(-di, 0), nx + min(-di, 0))
    src_j = slice(max(dj, 0), ny + min(dj, 0))
    dst_j = slice(max(-dj, 0), ny + min(-dj, 0))
    out[dst_i, dst_j] = a[src_i, src_j]
    return out


def dx(a):
    """Central first difference ``a[i+1] - a[i-1]`` along axis 0."""
    out = np.zeros_like(a)
    out[:-1] += a[1:]
    out[1:] -= a[:-1]
    return out


def dy(a):
    out = np.zeros_like(a)
    out[:, :-1] += a[:, 1:]
    out[:, 1:] -= a[:, :-1]
    return out


def dxx(a):
    out = -2.0 * a
    out[:-1] += a[1:]
    out[1:] += a[:-1]
    return out


def dyy(a):
    out = -2.0 * a
    out[:, :-1] += a[:, 1:]
    out[:, 1:] += a[:, :-1]
    return out


def dxy(a):
    """Four-point cross difference, equal to ``dx(dy(a))``."""
    return _shift(a, 1, 1) - _shift(a, -1, 1) - _shift(a, 1, -1) + _shift(a, -1, -1)


def dx2(a):
    """Wide second difference ``a[i+2] - 2a[i] + a[i-2]``."""
    out = -2.0 * a
    out[:-2] += a[2:]
    out[2:] += a[:-2]
    return out


def dy2(a):
    out = -2.0 * a
    out[:, :-2] += a[:, 2:]
    out[:, 2:] += a[:, :-2]
    return out


def _wrap(op):
    def apply(f):
        return Field(op(f.values), f.grid)

    apply.__name__ = "apply_" + op.__name__
    apply.__doc__ = f"Field version of :func:`{op.__name__}`."
    return apply


apply_dx = _wrap(dx)
apply_dy = _wrap(dy)
apply_dxx = _wrap(dxx)
apply_dyy = _wrap(dyy)
apply_dxy = _wrap(dxy)
apply_dx2 = _wrap(dx2)
apply_dy2 = _wrap(dy2)


def fused_weights(c0=1.0, cx=0.0, cy=0.0, cxx=0.0, cyy=0.0, gx=0.0, gy=0.0, d=0.0):
    """Node weights of ``c0 I + cx Dx + cy Dy + cxx Dxx + cyy Dyy + gx Dx2 + gy Dy2 + d Dxy``.

    Returns the 13 weights in the order expected by :func:`kernels.stencil13`.
    """
    return np.array([
        c0 - 2 * cxx - 2 * cyy - 2 * gx - 2 * gy,
        -cx + cxx, cx + cxx,
        -cy + cyy, cy + cyy,
        gx, gx, gy, gy,
        d, -d, -d, d,
    ])


def apply_fused(values, weights, backend=None):
    """Apply a constant-coefficient combination in one pass over ``values``."""
    return kernels.stencil13(values, weights, backend)
