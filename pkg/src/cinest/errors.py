"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


class AssumptionError(ValueError):
    """A model component violates one of the standing model assumptions."""


class StabilityError(RuntimeError):
    """The asymptotic dynamics matrix is not stable (spectral abscissa >= 0)."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class NumericError(RuntimeError):
    """A numerical routine failed or cannot meet its accuracy contract."""


class ConfigError(ValueError):
    """Configuration failed validation; carries the complete error list."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
