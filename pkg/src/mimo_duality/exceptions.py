"""Exception types raised by the package."""


class DualityError(ValueError):
    """Base class for every error raised by :mod:`mimo_duality`."""


class DimensionError(DualityError):
    """Matrix shapes do not match the system dimensions."""


class NoiseVarianceError(DualityError):
    """The noise variance is not strictly positive."""


class NonFiniteError(DualityError):
    """An input contains NaN or infinite entries."""


class PermutationError(DualityError):
    """A user ordering is not a bijection on the user indices."""


class NotHermitianError(DualityError):
    """A matrix that must be Hermitian is not, within tolerance."""


class NotPositiveDefiniteError(DualityError):
    """A matrix that must be positive (semi-)definite is not."""


class SingularMatrixError(DualityError):
    """A linear system cannot be solved because its matrix is singular."""


class UndefinedSinrError(DualityError):
    """SINR requested for a zero receive filter and a nonzero transmit filter."""


class CrossValidationError(DualityError):
    """Two independent conversion paths disagree beyond tolerance."""
