"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad field value, dimension mismatch, unknown key."""


class ResourceError(RuntimeError):
    """A configured resource cap (enumeration size, retry budget) was exceeded."""


class SplitError(RuntimeError):
    """A train/test split satisfying the coverage requirement could not be drawn."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss or reward encountered during optimization."""
