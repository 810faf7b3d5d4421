"""Exception types shared across the package."""


class PuriscopeError(Exception):
    """Base class for all package errors."""


class ValidationError(PuriscopeError):
    """An object failed its construction invariants."""


class DimensionError(PuriscopeError):
    """Operands have incompatible dimensions or an out-of-range selector."""


class DomainError(PuriscopeError):
    """A parameter lies outside the mathematically meaningful domain."""


class CapacityError(PuriscopeError):
    """The ancilla register is too small to hold the requested rank."""


class GapError(PuriscopeError):
    """A spectral-gap assumption is violated."""


class GuardError(PuriscopeError):
    """A desk-scale resource guard was exceeded."""


class InsufficientDataError(PuriscopeError):
    """The shot budget is too small for the requested reconstruction."""


class PreconditionError(PuriscopeError):
    """A protocol precondition on the input state does not hold."""
