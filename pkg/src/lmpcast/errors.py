"""Exception types raised across the toolkit.

Every error inherits from :class:`LmpcastError` so callers (notably the CLI)
can catch toolkit failures in one place while letting programming errors
propagate.
"""


class LmpcastError(Exception):
    """Base class for all toolkit errors."""


class AlignmentError(LmpcastError):
    """Two series that must share a calendar (start and length) do not."""


class NonPositiveArgument(LmpcastError):
    """A log transform was asked to take the log of a non-positive value."""


class DegenerateSeries(LmpcastError):
    """A series has zero variance where variation is required."""


class SeriesTooShort(LmpcastError):
    """A series is shorter than an operation's minimum length."""


class InsufficientPresample(LmpcastError):
    """Integration was given fewer presample values than the differencing order needs."""


class UnstableParameters(LmpcastError):
    """AR or MA polynomial has a root on or inside the unit circle."""


class MissingExogenousFuture(LmpcastError):
    """A forecast with exogenous regressors lacks future regressor values."""


class InvalidParameters(LmpcastError):
    """Conditional-variance parameters violate positivity or stationarity constraints."""


class EstimationFailed(LmpcastError):
    """Numerical likelihood maximization did not produce a usable fit."""


class AllTermsExcluded(LmpcastError):
    """Every term of the improvement index fell below the denominator threshold."""


class MismatchedWindows(LmpcastError):
    """Backtest reports being compared do not share a test window or horizon set."""


class ParseError(LmpcastError):
    """A data file row could not be parsed."""


class GapError(LmpcastError):
    """Hourly data has a missing hour and the gap policy is to reject."""


class SchemaError(LmpcastError):
    """A data file does not match the expected schema."""


class IoError(LmpcastError):
    """A file could not be written."""
