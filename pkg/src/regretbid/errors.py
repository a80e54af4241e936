"""Exception types raised across the package."""


class RegretBidError(Exception):
    """Base class for all package errors."""


class DegenerateFit(RegretBidError, ValueError):
    pass


class EmptySeries(RegretBidError, ValueError):
    pass


class NonPositiveBids(RegretBidError, ValueError):
    pass


class InsufficientDays(RegretBidError, ValueError):
    pass


class ZeroVariance(RegretBidError, ValueError):
    pass


class ZeroGradient(RegretBidError, ValueError):
    pass


class TooFewRows(RegretBidError, ValueError):
    pass


class InsufficientCoverage(RegretBidError, ValueError):
    pass


class TooShort(RegretBidError, ValueError):
    pass


class ZeroTrueBid(RegretBidError, ValueError):
    pass


class TooFewScores(RegretBidError, ValueError):
    pass


class SchemaError(RegretBidError, ValueError):
    """Malformed input file; the message names the offending row."""


class ConfigError(RegretBidError, ValueError):
    pass
