"""Exception types raised across the package

Everything subclasses a built-in exception so callers (and the CLI) can keep
catching ``ValueError`` for bad inputs and ``ArithmeticError`` for numerical
breakdowns.
"""


class InvalidDimensionError(ValueError):
    """The dimension is smaller than 3"""


class DomainError(ValueError):
    """A point or parameter lies outside the domain of an operation"""


class DegenerateOrbitError(DomainError):
    """The requested orbit is a single point (epsilon = v0)"""


class GeometryError(ValueError):
    """A point is not on the stated sphere, or no admissible ball exists"""


class InsufficientSpanError(ValueError):
    """A trajectory does not cover the span an operation needs"""


class SymmetryError(ValueError):
    """A factor is not rotationally symmetric about the origin"""


class HypothesisError(ValueError):
    """An instance violates the boundary mean-curvature hypothesis"""


class NumericalError(ArithmeticError):
    """A numerical procedure broke down"""


class OrbitEscapeError(NumericalError):
    """An integrated orbit left the half-plane {v > 0}"""


class ConditioningError(NumericalError):
    """A least-squares fit is too ill-conditioned to trust"""


class NoStartError(NumericalError):
    """No height with a positive reflection difference was found"""
