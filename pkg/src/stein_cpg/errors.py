"""Exception types shared across the package."""


class CPGError(Exception):
    """Base class for all errors raised by stein_cpg."""


class IntegrationDiverged(CPGError):
    """A non-finite state component appeared during integration."""

    def __init__(self, time: float, message: str = ""):
        self.time = float(time)
        super().__init__(message or f"integration diverged at t={self.time:.6g} s")


class NotPeriodicError(CPGError):
    """Too few threshold crossings to define a period."""


class WaitTimeout(CPGError):
    """The wait interval on F was not entered within the allowed number of cycles."""

    def __init__(self, command_time: float, timeout: float, interval):
        self.command_time = command_time
        self.timeout = timeout
        self.interval = tuple(interval)
        super().__init__(
            f"F never entered {self.interval} within {timeout:.4g} s of command at {command_time:.6g} s"
        )


class SubgroupError(CPGError):
    """K is not a subgroup of H."""


class OutOfWorkspace(CPGError):
    """Inverse kinematics target is not reachable by the two-link leg."""


class ConfigError(CPGError, ValueError):
    """Invalid configuration or override."""
