"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad layer sizes, unknown environment, malformed config file."""


class ShapeError(ValueError):
    """Array shape does not match what the operation requires."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, truncated, or fails validation."""


class TrainingError(RuntimeError):
    """Training produced non-finite values; carries the offending site in the message."""
