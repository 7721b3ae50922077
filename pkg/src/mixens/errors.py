"""Exception types shared across the package."""


class MixensError(Exception):
    """Base class for all library errors."""


class FormatError(MixensError):
    """A file does not conform to its declared format."""


class ValidationError(MixensError):
    """Data violates a structural invariant."""


class ShapeError(ValidationError):
    """Array dimensions do not match what an operation expects."""


class AlignmentError(MixensError):
    """Inputs that must share sample ids (or a task) do not."""


class MissingPredictorError(MixensError):
    """A referenced predictor is absent from the provided inputs."""


class ConfigError(MixensError):
    """Invalid configuration or parameter values."""


class DegenerateInputError(MixensError):
    """Well-formed input that admits no meaningful result (empty set, all-zero weights)."""
