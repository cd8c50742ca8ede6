"""Exception hierarchy shared by all thinfilm modules."""


class ThinFilmError(Exception):
    """Base class for every error raised by this package."""


# grid / regions
class RegionError(ThinFilmError, ValueError):
    pass


class EmptyRegion(RegionError):
    """No cell center lies inside the region (radius below grid resolution)."""


class RegionTooLarge(RegionError):
    """Region would overlap itself through the periodic seam."""


class RampUnresolved(RegionError):
    """Cutoff transition band has fewer cells than required."""

    def __init__(self, message, min_radius=None):
        super().__init__(message)
        self.min_radius = min_radius


# solver
class NonFinite(ThinFilmError, FloatingPointError):
    """A time step produced NaN or Inf."""


class Diverged(ThinFilmError):
    """Discrete energy grew beyond tolerance; dt_safety is too large."""


class RegimeViolation(ThinFilmError, ValueError):
    """Mobility exponent outside the open interval (2 - sqrt(4/5), 3)."""


# diagnostics
class AlphaOutOfRange(ThinFilmError, ValueError):
    pass


class NotBadTime(ThinFilmError, ValueError):
    """Morrey sup bound requested on a ball where the time is good."""


class InsufficientSnapshots(ThinFilmError, ValueError):
    pass


# regularity
class InsufficientPoints(ThinFilmError, ValueError):
    pass


class AllZeroExcess(ThinFilmError):
    """Every excess level vanished: super-polynomial decay, no finite exponent."""

    beta = float("inf")

    def __init__(self, message="all excess values are zero (super-polynomial decay)", levels=()):
        super().__init__(message)
        self.levels = list(levels)


class ScheduleError(ThinFilmError, ValueError):
    pass


# io
class SnapshotError(ThinFilmError):
    pass


class BadMagic(SnapshotError):
    pass


class VersionUnsupported(SnapshotError):
    pass


class TruncatedPayload(SnapshotError):
    def __init__(self, expected, actual):
        super().__init__(f"payload is {actual} bytes, expected {expected}")
        self.expected = expected
        self.actual = actual


class IoFailure(ThinFilmError, OSError):
    pass


class ConfigError(ThinFilmError, ValueError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key):
        super().__init__(f"unknown config key {key!r}")
        self.key = key


class ConstraintViolation(ConfigError):
    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


class SchemaMismatch(ThinFilmError, ValueError):
    pass
