"""
Exception hierarchy for advlayout.

Every error carries a ``kind`` (its class name) and an exit-code family so the
CLI can emit a machine-readable error line and a distinct exit status.
"""

EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_RUNTIME = 5


class AdvLayoutError(Exception):
    """Base class for all advlayout errors."""

    exit_code = EXIT_RUNTIME

    @property
    def kind(self) -> str:
        return type(self).__name__


class ParseError(AdvLayoutError):
    """Malformed graph, layout, or config file."""

    exit_code = EXIT_PARSE


class ValidationError(AdvLayoutError):
    """Input parsed but violates an invariant (self-loop, disconnected, ...)."""

    exit_code = EXIT_VALIDATION


class ArgumentError(ValidationError):
    """Arguments that cannot be satisfied."""


class DegenerateLayout(ValidationError):
    """Layout for which a quantity is undefined (e.g. all nodes coincide)."""


class MissingInitialLayout(ValidationError):
    """Per-graph normalization requested without an initial layout."""


class EmptyTestSet(ValidationError):
    pass


class ShapeMismatch(AdvLayoutError):
    pass


class DomainError(AdvLayoutError):
    """Operation evaluated outside its mathematical domain."""


class NonScalarLoss(AdvLayoutError):
    pass


class NonFiniteGradient(AdvLayoutError):
    pass


class NonFiniteLoss(AdvLayoutError):
    pass
