"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: structural/domain/parameter/capability/
precondition errors exit with 2, I/O and parse problems with 1, and a
constructed-but-uncertified path with 3.
"""


class WidepathsError(Exception):
    """Base class for all package errors."""


class StructureError(WidepathsError):
    """Shapes or structural invariants do not line up."""


class DomainError(WidepathsError):
    """A scalar formula was evaluated outside its domain."""


class ParameterError(WidepathsError):
    """An argument is outside its documented range."""


class CapabilityError(WidepathsError):
    """The instance is outside what the algorithm can guarantee (e.g. width)."""


class PreconditionError(WidepathsError):
    """A documented precondition does not hold for the given inputs."""


class ReductionFailureError(WidepathsError):
    """A sparsifying reduction finished but its certificate check failed."""


class ParseError(WidepathsError):
    """A file could not be parsed or fails its format invariants."""

