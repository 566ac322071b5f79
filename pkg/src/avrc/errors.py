"""Exception hierarchy shared by all modules."""


class AVRCError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(AVRCError, ValueError):
    """An input object violates its contract (shape, sign, normalisation)."""


class ChannelError(ValidationError):
    """A relay kernel is not a valid conditional distribution."""

    def __init__(self, message: str, index: tuple[int, ...] | None = None):
        super().__init__(message)
        self.index = index


class SpecError(ValidationError):
    """A channel spec file or command line option cannot be parsed."""


class StructureError(AVRCError):
    """A structural precondition (degradedness, orthogonality) does not hold."""


class SolverError(AVRCError):
    """A numerical solver failed or did not converge."""


class ConsistencyError(AVRCError, ArithmeticError):
    """An internal numerical invariant was violated beyond round-off."""


class ResourceCapError(AVRCError, MemoryError):
    """A request would exceed the configured resource cap."""
