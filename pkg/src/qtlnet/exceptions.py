"""Exception hierarchy shared by the qtlnet modules."""


class QTLnetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(QTLnetError, ValueError):
    """Raised when arguments violate an operation's preconditions."""


class InvalidStructureError(QTLnetError, ValueError):
    """Raised when a graph is cyclic or otherwise malformed."""


class InvalidModelError(QTLnetError, ValueError):
    """Raised for model parameters outside their admissible range."""


class DegenerateInputError(QTLnetError, ArithmeticError):
    """Raised when data are numerically degenerate for the requested analysis."""


class UnsupportedError(QTLnetError, NotImplementedError):
    """Raised when a request exceeds a supported size (e.g. exhaustive enumeration)."""
