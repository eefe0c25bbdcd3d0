"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the CLI can map failures onto the
documented exit-status taxonomy without a lookup table.
"""


class SceneryLabError(Exception):
    exit_code = 1


class ConfigError(SceneryLabError):
    """Malformed measure spec or out-of-range parameter."""

    exit_code = 2


class InvalidParams(ConfigError, ValueError):
    pass


class InvalidRadius(InvalidParams):
    pass


class UnsupportedKind(ConfigError, TypeError):
    pass


class PrecisionLoss(SceneryLabError):
    """An enclosure is too wide for the requested observable."""

    exit_code = 3


class ZeroMass(SceneryLabError):
    exit_code = 4


class AmbiguousMass(ZeroMass):
    """Enclosure has ``low == 0 < high``; refine the depth and retry."""


class OriginNotInSupport(ZeroMass):
    pass


class DepthExceeded(SceneryLabError):
    exit_code = 5
