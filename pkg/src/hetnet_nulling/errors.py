"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its contract.

    ``field`` names the offending entry so callers (in particular the CLI)
    can report it precisely.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalAccuracyError(RuntimeError):
    """An adaptive numerical routine failed to reach its requested tolerance."""


class InsufficientWindowError(RuntimeError):
    """The simulation window is too small to neutralize edge effects."""
