"""Exception hierarchy shared by all modules."""


class HeavyTrafficError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HeavyTrafficError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(HeavyTrafficError, ValueError):
    """A model fails its construction-time checks."""


class RegimeError(HeavyTrafficError):
    """The requested computation is not defined in the model's regime."""


class HorizonError(HeavyTrafficError, RuntimeError):
    """A probe horizon is too short to certify a global extremum."""


class BracketError(HeavyTrafficError, RuntimeError):
    """A root could not be bracketed or refined to tolerance."""


class ConfigError(HeavyTrafficError, ValueError):
    """A run configuration is malformed."""
