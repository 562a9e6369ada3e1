"""Exception types shared across the package."""


class DataError(Exception):
    """Raised for malformed datasets, files, or label/color mappings."""


class NumericError(Exception):
    """Raised when a computation produces non-finite values."""


class CheckpointError(DataError):
    """Raised when a checkpoint file is corrupt or does not match its spec."""
