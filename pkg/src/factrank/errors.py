class DataError(ValueError):
    """Input data is missing, malformed or inconsistent (CLI exit code 2)."""


class InvariantError(RuntimeError):
    """An internal invariant was violated (CLI exit code 3)."""
