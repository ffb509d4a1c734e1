"""Exception types raised across the package."""


class MadpError(Exception):
    """Base class for all package errors."""


class NumericalError(MadpError):
    pass


class ResourceError(MadpError):
    """A dense object would exceed the configured entry cap."""


class DimensionError(MadpError, ValueError):
    pass


class InfeasibleStrategyError(MadpError):
    """The strategy's row space does not contain the workload."""


class OptimizationFailedError(MadpError):
    pass


class PreconditionError(MadpError, ValueError):
    pass


class ParseError(MadpError, ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ConfigError(MadpError, ValueError):
    pass
