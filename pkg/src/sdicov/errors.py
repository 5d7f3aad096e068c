"""Exception types shared across the package."""


class SdicovError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SdicovError, ValueError):
    pass


class ZeroDirection(SdicovError, ValueError):
    """A direction vector has zero (or underflowed) norm."""


class NearSingular(SdicovError, ArithmeticError):
    """A rank-one transform ``I + p g^T / |p|^2`` is (numerically) singular.

    The determinant of the transform is ``mu = 1 + g.p / |p|^2``; this is
    raised when ``|mu|`` falls below the invertibility threshold.
    """

    def __init__(self, mu, eps_inv):
        super().__init__(f"|mu| = {abs(mu):.3e} below threshold {eps_inv:.1e}")
        self.mu = mu
        self.eps_inv = eps_inv


class NonPositiveCurvature(SdicovError, ArithmeticError):
    pass


class BreakdownError(SdicovError, ArithmeticError):
    """Linear CG hit ``n^T A n <= 0``; the matrix is not positive definite."""


class NotPositiveDefinite(SdicovError, ValueError):
    pass


class ConfigError(SdicovError, ValueError):
    """Malformed benchmark configuration or command-line input."""
