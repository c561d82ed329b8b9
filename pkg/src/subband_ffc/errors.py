"""Exception types shared across the package."""


class SubbandFFCError(Exception):
    """Base class for all package errors."""


class NumericInputError(SubbandFFCError, ValueError):
    """A non-finite sample was fed to a streaming operator."""


class ConfigurationError(SubbandFFCError, ValueError):
    """Inconsistent or invalid configuration (sample rates, orders, specs)."""


class FrequencyRangeError(SubbandFFCError, ValueError):
    """A frequency lies outside [0, fs/2]."""


class DimensionError(SubbandFFCError, ValueError):
    """Regressor or parameter vector has the wrong length."""


class BankDesignError(SubbandFFCError):
    """The requested stopband attenuation was not met.

    ``achieved_db`` carries the attenuation actually measured, and ``bank``
    the (sub-spec) design so callers can still inspect it.
    """

    def __init__(self, message, achieved_db, bank=None):
        super().__init__(message)
        self.achieved_db = achieved_db
        self.bank = bank


class DivergenceError(SubbandFFCError, ArithmeticError):
    """An adaptive estimator produced non-finite values or its gain wound up."""

    def __init__(self, message, region=None):
        super().__init__(message)
        self.region = region
