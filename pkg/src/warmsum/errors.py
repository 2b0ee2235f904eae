"""Shared exception types, mapped to CLI exit codes in cli.py."""


class ShapeMismatchError(ValueError):
    """Tensor shapes incompatible for the requested operation."""


class DataError(ValueError):
    """Bad input data: corpus files, vocabularies, configs, empty batches."""


class CheckpointError(DataError):
    """Unreadable, truncated, or version-incompatible checkpoint file."""


class NumericError(RuntimeError):
    """Non-finite values where finite ones are required (NaN abort)."""
