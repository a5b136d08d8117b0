"""Exception hierarchy shared by every module."""


class NadashError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NadashError, ValueError):
    """A model, parameter set or run configuration violates its invariants."""


class IngestionError(NadashError, ValueError):
    """A bandwidth trace could not be parsed or is malformed."""


class RangeError(NadashError, ValueError):
    """A query falls outside the interval covered by a timeline."""


class HorizonError(RangeError):
    """A transfer did not complete before the timelines ran out."""


class DomainError(NadashError, ValueError):
    """A numeric argument lies outside the domain of a function."""


class GuardError(NadashError, ValueError):
    """An exhaustive enumeration would exceed the size guard."""
