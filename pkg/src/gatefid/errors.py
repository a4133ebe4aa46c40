"""Exception types shared across the package.

The CLI maps these onto stable exit codes (see gatefid.cli).
"""


class GatefidError(Exception):
    """Base class for all package errors."""


class DimensionError(GatefidError):
    """Operands have incompatible Hilbert-space dimensions."""


class NumericalError(GatefidError):
    """A computed value violates an exact mathematical constraint beyond tolerance."""


class ConfigError(GatefidError):
    """Unknown name or malformed configuration value."""


class FormatError(GatefidError):
    """A file or string does not parse under the documented format."""


class ValidationError(GatefidError):
    """Parsed data violates a structural invariant (e.g. a non-unitary matrix)."""


class CapacityError(GatefidError):
    """Requested computation exceeds a configured size cap or an exhausted resource."""


class ConvergenceError(GatefidError):
    """An iterative method failed to converge within its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ParameterError(GatefidError):
    """A parameter is outside its documented domain."""


class PlanningError(GatefidError):
    """The parameter planner cannot meet the requested error budget."""


class PreconditionError(GatefidError):
    """A documented algorithm assumption is violated for the given inputs."""
