"""Exception types raised by the pipeline."""


class DataError(ValueError):
    """Input data violates a precondition (bad CSV, bad schema, too few rows)."""


class ModelFileError(ValueError):
    """An ensemble file cannot be read back (version, checksum, structure)."""
