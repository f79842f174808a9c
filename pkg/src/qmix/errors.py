"""Exception types shared across the toolkit."""


class QmixError(Exception):
    """Base class for toolkit errors."""


class DomainError(QmixError, ValueError):
    """Input outside the mathematical domain of an operation."""


class RangeError(QmixError, ValueError):
    """Point outside a tabulated range or an alias-safe window."""


class ConfigError(QmixError, ValueError):
    """Invalid configuration (bad field, unknown key, inconsistent grid)."""


class NumericalError(QmixError):
    """A numerical procedure failed its accuracy contract."""


class QuadratureError(NumericalError):
    """Quadrature refinement did not converge.

    Carries the last refinement residual so callers can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(NumericalError):
    """A dispersion denominator vanished or a marched field blew up."""


class ConsistencyError(NumericalError):
    """A structural invariant (symmetry, conservation) was violated."""


class DegeneracyError(NumericalError):
    """Geometric degeneracy, e.g. a curve passing through the test point."""


class ResolutionError(NumericalError):
    """A refinement cap was reached before meeting the resolution target."""


class InsufficientDataError(QmixError, ValueError):
    """Not enough usable samples for a fit or a certificate."""
