"""Exception hierarchy shared across the package."""


class GnpnError(Exception):
    """Base class for all errors raised by gnpn."""


class NotPositiveDefinite(GnpnError, ValueError):
    pass


class NonPositiveVariance(GnpnError, ValueError):
    pass


class IterationLimit(GnpnError, RuntimeError):
    pass


class RetriesExhausted(GnpnError, RuntimeError):
    pass


class DegenerateTree(GnpnError, RuntimeError):
    pass


class UnknownTransform(GnpnError, KeyError):
    pass


class QuadratureFailure(GnpnError, RuntimeError):
    pass


class DimensionMismatch(GnpnError, ValueError):
    pass


class NoDerivativeSequence(GnpnError, ValueError):
    pass


class SeriesDivergence(GnpnError, ArithmeticError):
    pass


class InvalidCovariance(GnpnError, ValueError):
    pass


class DegenerateColumn(GnpnError, ValueError):
    pass


class TooFewSamples(GnpnError, ValueError):
    pass


class ApplicabilityFailed(GnpnError, RuntimeError):
    """Raised in strict mode when ||R - I|| >= 1."""

    def __init__(self, norm):
        super().__init__(f"applicability check failed: ||R - I|| = {norm:.4f} >= 1")
        self.norm = norm


class NoKnee(GnpnError, RuntimeError):
    pass


class SingularCorrelation(GnpnError, ValueError):
    pass
