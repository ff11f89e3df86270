"""Exception hierarchy shared by all stages of the pipeline."""


class HofdError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HofdError, ValueError):
    """Invalid experiment or model configuration."""


class IndexOutOfRange(HofdError, IndexError):
    pass


class OutOfSupport(HofdError, ValueError):
    pass


class InsufficientSample(HofdError, ValueError):
    pass


class DegenerateGram(HofdError):
    """Pair Gram determinant fell below the degeneracy threshold."""

    def __init__(self, pair, det_value, threshold):
        self.pair = pair
        self.det_value = det_value
        self.threshold = threshold
        super().__init__(
            f"pair ({pair[0] + 1}, {pair[1] + 1}): det(A)={det_value:.3e} < threshold {threshold:.1e}"
        )


class SolveFailure(HofdError, ArithmeticError):
    pass


class EmptyDictionary(HofdError, ValueError):
    pass


class NonFiniteInput(HofdError, ValueError):
    pass


class SingularRefit(HofdError, ArithmeticError):
    pass


class NoConvergence(HofdError, RuntimeError):
    pass


class ZeroVariance(HofdError, ValueError):
    pass


class BadCorrelation(HofdError, ValueError):
    pass


class DependentInputsUnsupported(HofdError, ValueError):
    pass
