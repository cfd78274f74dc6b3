"""Exception types raised across the package."""


class VrsError(Exception):
    """Base class for all package errors."""


class StaleDataError(VrsError):
    """A record is older than its staleness limit or outside its validity window."""


class HealthError(VrsError):
    """The satellite is flagged unhealthy."""


class ConvergenceError(VrsError):
    """An iterative solver did not converge."""


class DegenerateGeometryError(VrsError):
    """Geometry makes the requested quantity undefined."""


class CoverageError(VrsError):
    """A query falls outside a model's spatial coverage."""


class BelowHorizonError(VrsError):
    """Satellite is below the horizon for the requested operation."""


class ConsistencyError(VrsError):
    """Records disagree (IOD mismatch, missing ephemeris, ...)."""


class EncodeError(VrsError):
    """A value cannot be represented on the wire."""


class DecodeError(VrsError):
    """A message payload is malformed."""


class FramingError(DecodeError):
    """Transport frame is malformed (preamble, length, truncation)."""


class IntegrityError(DecodeError):
    """Transport frame failed its CRC check."""


class RequestError(VrsError):
    """A client request line could not be parsed."""
