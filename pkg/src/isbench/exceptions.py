"""Exception types shared across the test bench."""


class DataError(ValueError):
    """Malformed or inconsistent input data (catalogs, hydraulic series)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class ModelError(RuntimeError):
    """A forecast model could not be calibrated or run for a learning period."""
