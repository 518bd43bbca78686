"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, bad option values, unknown keys."""


class DataFormatError(ValueError):
    """A dataset file could not be parsed; the message names the offending line."""


class NonFiniteError(FloatingPointError):
    """A tensor operation produced NaN or Inf."""


class TrainingDiverged(RuntimeError):
    """Training aborted on a non-finite loss; carries a diagnostic dump."""
