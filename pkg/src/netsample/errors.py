"""Exception hierarchy shared by all modules.

Two failure families matter to callers: bad inputs (files, parameters,
shape mismatches) and numerical breakdowns (non-convergence, spectral
degeneracy).  The CLI maps them to exit codes 2 and 3 respectively.
"""


class NetsampleError(Exception):
    """Base class for all package errors."""


class ValidationError(NetsampleError):
    """Invalid input: malformed file, bad parameter, contract violation."""


class ParseError(ValidationError):
    """A text input could not be parsed; message carries the line number."""


class NumericError(NetsampleError):
    """A numerical procedure failed: non-convergence, degenerate spectrum,
    reversibility violation beyond tolerance."""
