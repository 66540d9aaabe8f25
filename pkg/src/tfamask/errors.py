"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: config problems are usage errors,
file/data problems are data errors, and NaN losses or failed gradient
checks are numeric failures.
"""


class TfaMaskError(Exception):
    """Base class for all toolkit errors."""


class DataError(TfaMaskError):
    """Unreadable or malformed input data (WAV files, checkpoints)."""


class ConfigError(TfaMaskError):
    """Invalid configuration key or value."""


class NumericError(TfaMaskError):
    """Numeric failure: non-finite loss or a failed gradient check."""
