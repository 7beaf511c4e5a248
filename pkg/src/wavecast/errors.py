"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration."""


class InsufficientDataError(ValueError):
    """A series or split is too short for the requested windows."""


class DataSchemaError(ValueError):
    """A dataset file does not match the expected column contract."""


class IncompatibleCheckpointError(ValueError):
    """A checkpoint's configuration does not fit the requested use."""


class InstabilityError(ArithmeticError):
    """A simulation or optimisation produced non-finite numbers.

    ``partial`` carries whatever output was produced before the failure,
    ``last_time`` the last time (s) at which the state was still finite.
    """

    def __init__(self, message, last_time=None, partial=None):
        super().__init__(message)
        self.last_time = last_time
        self.partial = partial


class DivergenceError(ArithmeticError):
    """Training loss became non-finite."""
