"""Exception hierarchy shared by the library and the CLI."""


class TsirelsonError(Exception):
    """Base class for all errors raised by this package."""


class InvalidBehavior(TsirelsonError, ValueError):
    """A behavior fails normalization, positivity or no-signaling checks."""


class DegenerateFunctional(TsirelsonError, ValueError):
    """The local and no-signaling bounds of a Bell functional coincide."""


class ConstraintViolated(TsirelsonError, ValueError):
    """A behavior violates one of a polytope's Tsirelson constraints."""


class NotInPolytope(TsirelsonError, ValueError):
    """No convex combination of the model's extreme points reproduces a behavior."""


class SolverError(TsirelsonError, RuntimeError):
    """Numerical failure inside one of the solvers."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class MaxIterations(SolverError):
    pass


class NumericalBreakdown(SolverError):
    pass
