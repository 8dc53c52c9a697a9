"""Exception hierarchy shared by every module."""


class PursuitGuardError(Exception):
    pass


class DomainError(PursuitGuardError, ValueError):
    """Argument outside the valid range of a function (e.g. arc coordinate > L)."""


class GeometryError(PursuitGuardError):
    """Geometric precondition violated (point off curve, overlapping shapes, ...)."""


class NumericError(PursuitGuardError, ArithmeticError):
    pass


class ConfigError(PursuitGuardError, ValueError):
    pass


class StateError(PursuitGuardError):
    """Simulation state that the laws are not defined for."""


class BlockedError(PursuitGuardError):
    """No admissible motion exists (navigation is stuck)."""


class SchemaError(ConfigError):
    """Scenario file failed validation. ``field`` names the offending key."""

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field
