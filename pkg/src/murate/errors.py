"""Exception types shared across the toolkit."""


class MurateError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MurateError):
    """Input violates a documented contract (bad value, unknown language, ...)."""


class ParseError(MurateError):
    """A file could not be parsed; message names the offending line."""


class CheckpointError(MurateError):
    """A checkpoint file is corrupt, truncated, or incompatible."""
