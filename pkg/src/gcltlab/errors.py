"""Exception hierarchy shared by all gcltlab modules."""


class GcltError(Exception):
    """Base class for all gcltlab errors."""


class InvalidSpecError(GcltError, ValueError):
    """A domain object (parameters, weights, grid, ...) violates an invariant."""


class CapacityError(GcltError):
    """A request exceeds a hard resource bound (e.g. tree depth)."""


class NumericsError(GcltError):
    """Numerical failure: CFL violation, NaN/overflow during time stepping."""


class ConfigError(GcltError):
    """Malformed or invalid run configuration."""
