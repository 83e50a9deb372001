"""Exception types shared across the package."""


class MotifGibbsError(Exception):
    """Base class for package errors."""


class DimensionError(MotifGibbsError, ValueError):
    """Array shapes or lengths are inconsistent."""


class DomainError(MotifGibbsError, ValueError):
    """An argument lies outside its admissible range."""


class ResourceLimitError(MotifGibbsError):
    """A computation would exceed a configured size or iteration budget.

    ``partial`` carries whatever result was available when the limit hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NumericError(MotifGibbsError, ArithmeticError):
    """A numerical procedure failed (no bracket, no convergence)."""


class StructuralError(MotifGibbsError):
    """A graph-structure precondition failed (e.g. disconnected chain)."""


class ContractError(MotifGibbsError):
    """An input violates an operation's contract (e.g. non-reversible chain)."""
