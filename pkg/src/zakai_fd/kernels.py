"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``ZAKAI_FD_PURE=1``
forces the NumPy fallback. ``BACKEND`` names the active choice.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("ZAKAI_FD_PURE", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

__all__ = ["BACKEND", "stencil13", "solve_lines", "get_backend"]


def get_backend(name=None):
    """Kernel module by name (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def stencil13(v, weights, backend=None):
    """Fused 13-point stencil on ``v`` with zero values beyond the array."""
    impl = get_backend(backend)
    p = np.pad(np.asarray(v, dtype=float), 2)
    out = np.empty(v.shape)
    impl.stencil13(p, np.ascontiguousarray(weights, dtype=float), out)
    return out


def solve_lines(factor, rhs, backend=None):
    """Solve every line of ``rhs`` along ``factor.axis`` with a prepared factor."""
    impl = get_backend(backend)
    rhs = np.ascontiguousarray(rhs, dtype=float)
    shape = rhs.shape
    lower, cp, inv = (np.broadcast_to(a, shape) for a in factor.arrays_for(shape))
    out = np.empty(shape)
    if factor.axis == 0:
        impl.solve_axis0(lower, cp, inv, rhs, out)
    else:
        impl.solve_axis1(lower, cp, inv, rhs, out)
    return out
