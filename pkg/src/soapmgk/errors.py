"""Exception types shared across the toolkit."""


class SoapmgkError(Exception):
    """Base class for all toolkit errors."""


class OverloadError(SoapmgkError):
    """Offered load is at or above capacity (rho >= 1)."""


class BadBracketError(SoapmgkError):
    """Root bracket does not enclose the target value."""


class ToleranceNotMetError(SoapmgkError):
    """Adaptive routine exhausted its subdivision budget."""


class DegenerateIntervalError(SoapmgkError):
    """Completion probability over the interval is zero."""


class UnsupportedPointError(SoapmgkError):
    """Quantity undefined at the queried point (atom, gap, or beyond support)."""


class NotApplicableError(SoapmgkError):
    """Operation requires a declared distribution-class membership that is absent."""


class BranchMismatchError(SoapmgkError):
    """Requested heavy-traffic branch contradicts the declared classes."""


class NoSolutionError(SoapmgkError):
    """Inverse query has no solution within the numeric horizon."""


class NonconvergenceError(SoapmgkError):
    """Simulation queue grew without bound."""


class ConfigError(SoapmgkError):
    """Invalid experiment configuration."""


class SpecParseError(SoapmgkError):
    """Malformed distribution or option specification string."""
