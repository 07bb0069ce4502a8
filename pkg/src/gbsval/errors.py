"""Exception hierarchy shared by all modules.

The CLI maps :class:`InputError` to exit status 2 and :class:`NumericError`
to exit status 3.
"""


class GBSError(Exception):
    """Base class for every error raised by this package."""


class InputError(GBSError, ValueError):
    """Malformed, inconsistent or out-of-range input."""


class NumericError(GBSError, ArithmeticError):
    """A computation failed: unphysical matrix, lost positivity, non-finite log."""
