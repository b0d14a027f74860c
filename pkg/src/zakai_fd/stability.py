"""Mean-square stability of the constant-coefficient Milstein schemes.

Fourier mode ``exp(i(xi x + eta y))`` is multiplied each step by a random
factor ``C_n``; a scheme is mean-square stable when ``E|C_n|^2 < 1`` for all
wavenumbers. The moments here are closed-form, assembled term by term from
the Gaussian identities of the correlated draws. The drift does not enter:
it contributes a phase to the implicit factors and is set to zero, as in the
analysis these formulas reproduce.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AssumptionViolation, DomainError, ParameterError
from .model import ModelParams

__all__ = [
    "WaveCoefficients",
    "StabilityMargins",
    "AmplificationReport",
    "check_assumption",
    "explicit_cfl_bounds",
    "wave_coefficients",
    "amplification_moment2",
    "moment2_lattice",
    "wavenumber_lattice",
    "stability_region_sweep",
    "write_region_csv",
    "margins",
    "advisory_timestep",
]

_SCHEMES = ("ExplicitMilstein", "ImplicitMilstein", "AdiMilstein")


class WaveCoefficients(NamedTuple):
    a_x: np.ndarray
    a_y: np.ndarray
    b_x: np.ndarray
    b_y: np.ndarray
    c_x: np.ndarray
    c_y: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class StabilityMargins:
    beta: float
    theta0: float
    theta: float


@dataclass(frozen=True)
class AmplificationReport:
    xi: float
    eta: float
    moment2: float
    stable: bool


def check_assumption(p):
    """Return ``(ok, (s1, s2, s3))`` for the three correlation conditions ``s < 1``."""
    r = abs(p.rho_xy)
    s1 = 2 * p.rho_x ** 2 * (1 + 2 * r)
    s2 = 2 * p.rho_y ** 2 * (1 + 2 * r)
    s3 = 2 * p.rho_x * p.rho_y * (3 * r * r + 2 * r + 1)
    return (s1 < 1 and s2 < 1 and s3 < 1), (s1, s2, s3)


def explicit_cfl_bounds(p):
    """Largest ``k/h_x^2`` and ``k/h_y^2`` for which the explicit scheme is proven stable."""
    rx, ry, r = p.rho_x, p.rho_y, abs(p.rho_xy)
    common = 2 * rx * ry + 6 * rx * ry * r * r
    bx = 2 + 2 * rx ** 2 + common + (3 * rx + ry + 4 * rx ** 2 + 4 * rx * ry) * r
    by = 2 + 2 * ry ** 2 + common + (rx + 3 * ry + 4 * ry ** 2 + 4 * rx * ry) * r
    return 1.0 / bx, 1.0 / by


def wave_coefficients(xi, eta, h_x, h_y):
    """Symbols of the difference operators at wavenumber ``(xi, eta)``.

    ``a`` comes from the second differences, ``b`` from the wide ones, ``c``
    from the central first differences and ``d`` from the cross stencil.
    Accepts scalars or arrays.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tol = 1e-12
    if np.any(np.abs(xi) * h_x > math.pi * (1 + tol)) or np.any(np.abs(eta) * h_y > math.pi * (1 + tol)):
        raise DomainError("wavenumber outside [-pi/h, pi/h]")
    sx = np.sin(xi * h_x)
    sy = np.sin(eta * h_y)
    a_x = -2 * np.sin(xi * h_x / 2) ** 2 / h_x ** 2
    a_y = -2 * np.sin(eta * h_y / 2) ** 2 / h_y ** 2
    b_x = -sx ** 2 / (2 * h_x ** 2)
    b_y = -sy ** 2 / (2 * h_y ** 2)
    c_x = sx / h_x
    c_y = sy / h_y
    d = -sx * sy / (h_x * h_y)
    return WaveCoefficients(a_x, a_y, b_x, b_y, c_x, c_y, d)


def _kind_name(kind):
    name = getattr(kind, "name", kind)
    if name not in _SCHEMES:
        raise ParameterError(f"no amplification formula for {kind}")
    return name


def moment2_lattice(p, k, h_x, h_y, xi, eta, kind):
    """Vectorised ``E|C_n|^2`` over arrays of wavenumbers."""
    name = _kind_name(kind)
    w = wave_coefficients(xi, eta, h_x, h_y)
    rx, ry, r = p.rho_x, p.rho_y, p.rho_xy
    sq = math.sqrt(rx * ry)
    # real part R = 1 + A + B with B the noise-squared terms; imaginary part I
    EB = w.d * sq * r * k
    EB2 = (
        2 * w.b_x ** 2 * rx ** 2 * k ** 2
        + 2 * w.b_y ** 2 * ry ** 2 * k ** 2
        + w.d ** 2 * rx * ry * (1 + 2 * r * r) * k ** 2
        + 4 * w.b_x * w.b_y * rx * ry * r * r * k ** 2
        + 4 * w.b_x * w.d * rx * sq * r * k ** 2
        + 4 * w.b_y * w.d * ry * sq * r * k ** 2
    )
    EI2 = w.c_x ** 2 * rx * k + w.c_y ** 2 * ry * k + 2 * w.c_x * w.c_y * sq * r * k
    A = (w.a_x + w.a_y) * k if name == "ExplicitMilstein" else 0.0
    ER2 = (1 + A) ** 2 + 2 * (1 + A) * EB + EB2
    if name == "ImplicitMilstein":
        den2 = (1 - (w.a_x + w.a_y) * k) ** 2
    elif name == "AdiMilstein":
        den2 = ((1 - w.a_x * k) * (1 - w.a_y * k)) ** 2
    else:
        den2 = 1.0
    return (ER2 + EI2) / den2


def amplification_moment2(p, k, h_x, h_y, xi, eta, kind):
    m2 = float(moment2_lattice(p, k, h_x, h_y, xi, eta, kind))
    return AmplificationReport(float(xi), float(eta), m2, m2 < 1.0)


def wavenumber_lattice(h_x, h_y, n=101):
    """``n x n`` lattice on the Nyquist box, endpoints included."""
    # built from a symmetric integer grid so the centre of an odd lattice is exactly zero
    t = (2 * np.arange(n) - (n - 1)) / (n - 1)
    xi = t * (math.pi / h_x)
    eta = t * (math.pi / h_y)
    return np.meshgrid(xi, eta, indexing="ij")


def _sup_nonzero(p, k, h, kind, n):
    XI, ETA = wavenumber_lattice(h, h, n)
    m2 = moment2_lattice(p, k, h, h, XI, ETA, kind)
    m2[(XI == 0) & (ETA == 0)] = -np.inf
    return float(m2.max())


def stability_region_sweep(cells, k, h, kind, n=101):
    """Assumption check and lattice supremum of ``E|C_n|^2`` per parameter cell.

    ``cells`` is an iterable of ``(rho_x, rho_y, rho_xy)``; the origin is
    excluded from the supremum since ``C_n = 1`` there for every scheme.
    """
    rows = []
    for rx, ry, rxy in cells:
        p = ModelParams(rho_x=rx, rho_y=ry, rho_xy=rxy)
        ok, _ = check_assumption(p)
        sup = _sup_nonzero(p, k, h, kind, n)
        rows.append(dict(rho_x=rx, rho_y=ry, rho_xy=rxy, assumption_pass=ok,
                         sup_moment2=sup, stable=sup < 1.0))
    return rows


def write_region_csv(rows, path):
    cols = ["rho_x", "rho_y", "rho_xy", "assumption_pass", "sup_moment2", "stable"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({c: (int(row[c]) if isinstance(row[c], bool) else row[c]) for c in cols})


def margins(p):
    r = abs(p.rho_xy)
    beta = min(
        1 - p.rho_x,
        1 - p.rho_y,
        1 - 2 * p.rho_x ** 2 * (1 + 2 * r),
        1 - 2 * p.rho_y ** 2 * (1 + 2 * r),
        1 - 2 * p.rho_x * p.rho_y * (1 + 2 * r + 3 * r * r),
    )
    if beta <= 0:
        raise AssumptionViolation(f"beta={beta:.4g} is not positive")
    theta0 = 1 - beta / 2
    return StabilityMargins(beta, theta0, math.sqrt(theta0))


def advisory_timestep(p, T, h_min, C0=1.0, beta_exp=1.0):
    """Timestep below which the Dirac-data error bound stays controlled.

    ``C0`` and ``beta_exp`` are the free constants of the bound.
    """
    if h_min <= 0 or T <= 0:
        raise ParameterError("T and h_min must be positive")
    theta = margins(p).theta
    return T * math.log2(1 / theta) / (C0 + (4 + beta_exp) * math.log2(1 / h_min))
