"""
Exception hierarchy for geolift and the CLI exit-code mapping.
"""

from typing import Optional, Sequence


class GeoliftError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(GeoliftError, ValueError):
    """Invalid or unreadable configuration."""

    exit_code = 2


class ValidationError(GeoliftError, ValueError):
    """Input data violates a documented precondition."""

    exit_code = 2


class DimensionError(ValidationError):
    """Shapes or requested dimensions are inconsistent."""


class InvalidProbabilityError(ValidationError):
    """A kernel value used as an edge probability lies outside [0, 1]."""

    def __init__(self, i: int, j: int, value: float) -> None:
        super().__init__(f"Kernel value f(z_{i}, z_{j}) = {value!r} is not a probability in [0, 1]")
        self.pair = (i, j)
        self.value = value


class UnsupportedVariantError(GeoliftError, ValueError):
    """The kernel variant does not provide the requested quantity."""

    exit_code = 2


class DataConditionError(GeoliftError, ValueError):
    """The data is well formed but cannot be processed as requested."""

    exit_code = 3


class DisconnectedGraphError(DataConditionError):
    """A graph or distance matrix splits into several connected components."""

    def __init__(self, message: str, component_sizes: Optional[Sequence[int]] = None) -> None:
        sizes = list(component_sizes or [])
        if sizes:
            message = f"{message} (component sizes: {sizes})"
        super().__init__(message)
        self.component_sizes = sizes


class ZeroVarianceError(DataConditionError):
    """A series or coordinate vector is constant."""

    def __init__(self, message: str, entity: Optional[str] = None) -> None:
        super().__init__(message)
        self.entity = entity


class AssumptionViolationError(DataConditionError):
    """A kernel violates the positivity conditions the geometry relies on."""


class ConvergenceError(GeoliftError, RuntimeError):
    """An iterative numerical routine failed to converge."""

    exit_code = 4

    def __init__(self, message: str, residual: Optional[float] = None) -> None:
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code used by the CLI."""
    if isinstance(exc, GeoliftError):
        return exc.exit_code
    return 1
