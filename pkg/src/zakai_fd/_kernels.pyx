# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: fused 13-point stencil and batched tridiagonal sweeps.

Factor arrays follow the layout produced by ``solvers.factor_lines``: for a
solve along axis ``a`` the arrays are indexed like the right-hand side, with
the sweep running along ``a``. Broadcast (zero-stride) views are accepted.
"""


def stencil13(const double[:, ::1] p, const double[::1] w, double[:, ::1] out):
    """Apply the fused stencil to ``p`` padded with two ghost layers.

    Weight order: centre, x-1, x+1, y-1, y+1, x-2, x+2, y-2, y+2,
    (+1,+1), (-1,+1), (+1,-1), (-1,-1).
    """
    cdef Py_ssize_t nx = out.shape[0], ny = out.shape[1]
    cdef Py_ssize_t i, j, I, J
    cdef double w0 = w[0], wxm = w[1], wxp = w[2], wym = w[3], wyp = w[4]
    cdef double wxm2 = w[5], wxp2 = w[6], wym2 = w[7], wyp2 = w[8]
    cdef double wpp = w[9], wmp = w[10], wpm = w[11], wmm = w[12]
    with nogil:
        for i in range(nx):
            I = i + 2
            for j in range(ny):
                J = j + 2
                out[i, j] = (
                    w0 * p[I, J]
                    + wxm * p[I - 1, J] + wxp * p[I + 1, J]
                    + wym * p[I, J - 1] + wyp * p[I, J + 1]
                    + wxm2 * p[I - 2, J] + wxp2 * p[I + 2, J]
                    + wym2 * p[I, J - 2] + wyp2 * p[I, J + 2]
                    + wpp * p[I + 1, J + 1] + wmp * p[I - 1, J + 1]
                    + wpm * p[I + 1, J - 1] + wmm * p[I - 1, J - 1]
                )


def solve_axis0(const double[:, :] lower, const double[:, :] cp,
                const double[:, :] inv, const double[:, ::1] rhs, double[:, ::1] x):
    """Thomas sweeps along axis 0, one independent system per column."""
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1]
    cdef Py_ssize_t i, j
    with nogil:
        for j in range(m):
            x[0, j] = rhs[0, j] * inv[0, j]
        for i in range(1, n):
            for j in range(m):
                x[i, j] = (rhs[i, j] - lower[i, j] * x[i - 1, j]) * inv[i, j]
        for i in range(n - 2, -1, -1):
            for j in range(m):
                x[i, j] = x[i, j] - cp[i, j] * x[i + 1, j]


def solve_axis1(const double[:, :] lower, const double[:, :] cp,
                const double[:, :] inv, const double[:, ::1] rhs, double[:, ::1] x):
    """Thomas sweeps along axis 1, one independent system per row."""
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double prev
    with nogil:
        for i in range(m):
            prev = rhs[i, 0] * inv[i, 0]
            x[i, 0] = prev
            for j in range(1, n):
                prev = (rhs[i, j] - lower[i, j] * prev) * inv[i, j]
                x[i, j] = prev
            for j in range(n - 2, -1, -1):
                prev = x[i, j] - cp[i, j] * prev
                x[i, j] = prev
