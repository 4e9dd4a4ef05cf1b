"""Exception hierarchy shared by the library and the CLI."""


class PSMError(Exception):
    """Base class for all library errors."""


class ConfigError(PSMError, ValueError):
    """Invalid model or experiment parameters."""


class BudgetExceededError(PSMError):
    """An enumeration or sampling budget was exhausted."""


class SamplingError(BudgetExceededError):
    """Rejection sampling ran out of attempts."""


class SaturationError(PSMError, OverflowError):
    """A closed-form quantity would overflow double precision."""


class RecoveryError(PSMError, RuntimeError):
    """An estimator could not produce a valid support."""
