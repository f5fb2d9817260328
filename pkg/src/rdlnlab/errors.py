"""Exception hierarchy shared by every module."""


class RdlnError(Exception):
    """Base class for all errors raised by rdlnlab."""


class ParameterError(RdlnError, ValueError):
    """Invalid argument, shape or dimension."""


class DecodeError(RdlnError):
    """Every path through the trellis has zero probability."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class AlignmentError(DecodeError):
    """The transcript cannot be aligned to the given frames."""


class TrainingError(RdlnError):
    """Non-finite gradients or a diverging optimisation step."""


class LoadError(RdlnError):
    """A persisted file is malformed or truncated."""


class ConfigError(RdlnError):
    """Mutually inconsistent experiment configuration."""
