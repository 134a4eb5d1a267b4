"""Exception types raised across the package."""


class SmoothLimeError(Exception):
    """Base class for all package errors."""


class NotSPD(SmoothLimeError, ValueError):
    """Matrix is not symmetric positive definite (a Cholesky pivot collapsed)."""


class RankDeficient(SmoothLimeError, ValueError):
    """The perturbation design matrix cannot support a least-squares fit."""


class TooFewSamples(SmoothLimeError, ValueError):
    pass


class DimensionMismatch(SmoothLimeError, ValueError):
    pass


class EmptySplit(SmoothLimeError, ValueError):
    pass


class ParseError(SmoothLimeError, ValueError):
    """Malformed CSV content. ``line`` is the 1-based line number in the file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonBinaryTarget(SmoothLimeError, ValueError):
    pass


class DegenerateFeature(SmoothLimeError, ValueError):
    pass
