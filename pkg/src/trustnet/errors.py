"""Exception hierarchy shared across the package.

The split mirrors the CLI exit-code contract: usage problems exit 1,
data problems exit 2, numeric failures exit 3.
"""


class TrustNetError(Exception):
    """Base class for all package errors."""


class DataError(TrustNetError):
    """Malformed, inconsistent, or missing input data."""


class ParseError(DataError):
    """Edge-list (or embedding-file) syntax error; carries a line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SamplingError(DataError):
    """Negative sampling is infeasible (resample cap exceeded)."""


class NumericError(TrustNetError):
    """Non-finite value produced where finite values are required."""
