"""Exception hierarchy shared by all modules."""


class ZakaiError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(ZakaiError, ValueError):
    """A parameter violates its documented invariant."""


class DomainError(ZakaiError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class GridMismatchError(ZakaiError, ValueError):
    """Two fields that must share a grid do not."""


class AlignmentError(ZakaiError, ValueError):
    """A fine grid does not nest the coarse grid node-for-node."""


class AssumptionViolation(ZakaiError, ValueError):
    """Correlation parameters fail the mean-square stability assumption."""


class NumericalError(ZakaiError, ArithmeticError):
    """Base class for failures of the linear algebra."""


class SingularMatrixError(NumericalError):
    """A tridiagonal elimination met a (near-)zero pivot."""

    def __init__(self, row, pivot, factor=None):
        self.row = row
        self.pivot = pivot
        self.factor = factor
        where = f" in factor {factor!r}" if factor is not None else ""
        super().__init__(f"zero pivot {pivot:.3e} at row {row}{where}")


class IterationError(NumericalError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, iterations, residual, tol):
        self.iterations = iterations
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"no convergence after {iterations} iterations: "
            f"relative residual {residual:.3e} > tol {tol:.1e}"
        )
