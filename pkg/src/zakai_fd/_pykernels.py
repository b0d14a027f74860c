"""NumPy versions of the compiled kernels, used when the extension is absent.

Signatures and results match ``_kernels`` exactly; see that module for the
argument layout.
"""

import numpy as np


def stencil13(p, w, out):
    nx, ny = out.shape
    c = slice(2, nx + 2), slice(2, ny + 2)

    def sh(di, dj):
        return p[2 + di:nx + 2 + di, 2 + dj:ny + 2 + dj]

    np.multiply(p[c], w[0], out=out)
    for wt, (di, dj) in zip(
        w[1:],
        [(-1, 0), (1, 0), (0, -1), (0, 1), (-2, 0), (2, 0), (0, -2), (0, 2),
         (1, 1), (-1, 1), (1, -1), (-1, -1)],
    ):
        if wt != 0.0:
            out += wt * sh(di, dj)


def solve_axis0(lower, cp, inv, rhs, x):
    n = x.shape[0]
    x[0] = rhs[0] * inv[0]
    for i in range(1, n):
        x[i] = (rhs[i] - lower[i] * x[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]


def solve_axis1(lower, cp, inv, rhs, x):
    n = x.shape[1]
    x[:, 0] = rhs[:, 0] * inv[:, 0]
    for j in range(1, n):
        x[:, j] = (rhs[:, j] - lower[:, j] * x[:, j - 1]) * inv[:, j]
    for j in range(n - 2, -1, -1):
        x[:, j] -= cp[:, j] * x[:, j + 1]
