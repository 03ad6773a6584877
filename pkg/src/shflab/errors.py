"""Exception hierarchy shared by all modules."""


class ShfLabError(Exception):
    """Base class for errors raised by this package."""


class DomainError(ShfLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ShfLabError, ValueError):
    """Inconsistent or invalid configuration parameters."""


class SchemaError(ConfigError):
    """A configuration document does not match its schema."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericError(ShfLabError, ArithmeticError):
    """A numerical procedure failed to reach the requested accuracy.

    Attributes
    ----------
    achieved : float
        Best error estimate that was reached, or ``nan`` if unknown.
    """

    def __init__(self, message: str, achieved: float = float("nan")):
        self.achieved = achieved
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")


class DegeneracyError(NumericError):
    """A Gaussian integral over internal vertices does not converge."""

    def __init__(self, message: str, vertices=()):
        self.vertices = tuple(vertices)
        ShfLabError.__init__(self, f"{message}: vertices {sorted(self.vertices)}")
        self.achieved = float("inf")


class CapabilityError(ShfLabError):
    """The requested computation exceeds the supported size or budget."""


class PreconditionError(ShfLabError, ValueError):
    """An input violates a documented precondition."""


class PSDError(ShfLabError, ValueError):
    """A kernel matrix is not positive semidefinite within tolerance."""
