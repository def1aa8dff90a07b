"""Exception hierarchy.

Validation problems derive from ``ValueError`` so callers that only care about
bad input can catch the builtin; numeric problems derive from
``ArithmeticError``.
"""


class ValidationError(ValueError):
    """Input failed a structural or domain check."""


class ParseError(ValidationError):
    """A serialized key or document could not be interpreted."""


class AsymmetricMatrixError(ValidationError):
    pass


class DiagonalError(ValidationError):
    pass


class NotPositiveDefiniteError(ValidationError):
    pass


class NumericError(ArithmeticError):
    """A computation could not be completed reliably."""


class PrecisionError(NumericError):
    """The requested accuracy cannot be reached; no value is returned."""


class FitError(NumericError):
    pass
