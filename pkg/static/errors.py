"""Exception hierarchy shared by the simulator, the config layer and the CLI."""
from typing import Optional


class SimulationError(Exception):
    """Base class for every failure raised while simulating or scoring a session"""


class InvalidDensityMatrix(SimulationError):
    pass


class KrausNotTracePreserving(SimulationError):
    pass


class DegenerateOutcome(SimulationError):
    pass


class QuadratureNotConverged(SimulationError):
    pass


class EmptySiftedKey(SimulationError):
    pass


class DivisionByZeroGain(SimulationError):
    pass


class InvalidPulse(SimulationError):
    pass


class ConfigError(Exception):
    """Base class for configuration problems; `key` is the dotted config key when known"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass
