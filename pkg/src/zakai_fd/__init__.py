"""Finite-difference Milstein schemes for two-dimensional Zakai-type SPDEs."""

from .errors import (
    AlignmentError,
    AssumptionViolation,
    DomainError,
    GridMismatchError,
    IterationError,
    NumericalError,
    ParameterError,
    SingularMatrixError,
    ZakaiError,
)
from .exact import exact_density, exact_field
from .kernels import BACKEND
from .model import (
    Field,
    Grid2D,
    ModelParams,
    OffGridWarning,
    TimeGrid,
    dirac_initial,
    gaussian_initial,
    mass,
)
from .schemes import CoefficientFields, HestonSpdeParams, SchemeKind, evolve
from .stochastic import BrownianPath, LevyAreaSample, PathStep, draw_fine_path, draw_path

__version__ = "0.1.0"
