"""Exception types shared across the package.

Everything deliberate raises a subclass of SfagcError so callers (and the
CLI) can tell contract violations apart from genuine crashes.
"""


class SfagcError(Exception):
    """Base class for errors raised on purpose by this package."""


class ShapeError(SfagcError):
    """Operand shapes violate an op's contract."""


class InvalidArgument(SfagcError):
    """Argument value outside the documented domain."""


class ParseError(SfagcError):
    """Malformed input file; message carries location where known."""


class CheckpointError(SfagcError):
    """Checkpoint does not match the parameters it is loaded into."""
