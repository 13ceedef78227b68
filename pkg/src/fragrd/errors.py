"""Exception hierarchy shared by the library and the command line."""


class FragrdError(Exception):
    """Base class for all errors raised by fragrd."""


class ConfigError(FragrdError, ValueError):
    """Invalid parameters or configuration file."""


class InvalidMaskError(ConfigError):
    """A lattice mask that is not rectangular or not binary."""


class LandscapeParseError(ConfigError):
    """Malformed landscape text file."""


class InfeasibleTargetError(FragrdError, ValueError):
    """Requested aggregation index lies outside the achievable range."""

    def __init__(self, target, s_min, s_max, message=None):
        self.target = target
        self.s_min = s_min
        self.s_max = s_max
        if message is None:
            message = (f"target aggregation index {target} is infeasible; "
                       f"achievable range is [{s_min}, {s_max}]")
        super().__init__(message)


class ConvergenceError(FragrdError, RuntimeError):
    """Landscape annealing ran out of budget before hitting the target exactly."""


class NumericalError(FragrdError, RuntimeError):
    """The time integration produced an invalid state."""
