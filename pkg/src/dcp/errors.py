"""Exception types shared across the package.

The CLI maps these onto exit codes: invalid arguments and bad
configuration are usage errors (2), malformed input files are data
errors (3), and solver failures are numeric errors (4).
"""


class DcpError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DcpError, ValueError):
    """An argument violates a documented precondition."""


class SingularDesignError(DcpError):
    """The design matrix is rank deficient (or otherwise degenerate)."""


class DataFormatError(DcpError):
    """An input file does not match the expected schema."""


class NumericError(DcpError):
    """A numeric routine failed to produce a usable result."""
