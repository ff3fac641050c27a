"""Exception hierarchy shared by all subpackages."""


class OpGraphError(Exception):
    """Base class for every error raised by this package."""


class TypedInputError(OpGraphError, TypeError):
    """An input field does not match the declared edge type."""


class NumericDomainError(OpGraphError, ValueError):
    """Non-finite input, or an input outside a function's domain."""


class ParamError(OpGraphError, ValueError):
    """A parameter record violates its invariants."""


class LinearizationRequiredError(OpGraphError):
    """The adjoint of a nonlinear node was requested without an operating point."""


class OracleTooLargeError(OpGraphError):
    """Dense materialization was requested above the configured size cap."""


class CompositionError(OpGraphError):
    """A graph could not be evaluated (e.g. a malformed merge)."""


class GraphParseError(OpGraphError, ValueError):
    """A serialized graph or registry document could not be parsed."""


class ComplexityError(OpGraphError):
    """A graph exceeds the configured node-count or depth bound."""


class ClassificationError(OpGraphError, ValueError):
    """A stage descriptor is inconsistent and cannot be classified."""


class ComparisonError(OpGraphError, ValueError):
    """Two operator outputs cannot be compared (shape mismatch)."""


class UnknownModalityError(OpGraphError, KeyError):
    """A modality name is not present in the registry."""
