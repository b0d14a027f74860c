"""Closed-form solution of the constant-coefficient model with Dirac data."""

import math

import numpy as np

from .errors import DomainError
from .model import Field

__all__ = ["exact_density", "exact_field"]


def _density(t, X, Y, p, m_x, m_y, x0, y0):
    if t <= 0:
        raise DomainError(f"t={t} must be positive")
    sx = (1.0 - p.rho_x) * t
    sy = (1.0 - p.rho_y) * t
    cx = x0 + p.mu_x * t + math.sqrt(p.rho_x) * m_x
    cy = y0 + p.mu_y * t + math.sqrt(p.rho_y) * m_y
    expo = -((X - cx) ** 2) / (2 * sx) - ((Y - cy) ** 2) / (2 * sy)
    return np.exp(expo) / (2 * math.pi * math.sqrt((1.0 - p.rho_x) * (1.0 - p.rho_y)) * t)


def exact_density(t, x, y, p, m_x, m_y, x0, y0):
    """Solution value at ``(x, y)`` and time ``t`` given the driver values ``m_x, m_y``.

    The density is Gaussian with mean ``(x0 + mu_x t + sqrt(rho_x) m_x, ...)``
    and variances ``(1 - rho_x) t`` and ``(1 - rho_y) t``.
    """
    return float(_density(t, x, y, p, m_x, m_y, x0, y0))


def exact_field(grid, t, p, m_x, m_y, x0, y0):
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return Field(_density(t, X, Y, p, m_x, m_y, x0, y0), grid)
