"""Exception hierarchy.

Hypothesis violations share a base class so callers (and the command line
front end) can tell a modelling problem apart from a numerical failure.
"""


class GaussFlowError(Exception):
    """Base class for all package errors."""


class ModelError(GaussFlowError, ValueError):
    pass


class DimensionMismatch(ModelError):
    pass


class NotPSD(ModelError):
    def __init__(self, name, worst_eigenvalue):
        self.name = name
        self.worst_eigenvalue = float(worst_eigenvalue)
        super().__init__(
            f"{name} is not positive semi-definite "
            f"(worst eigenvalue {self.worst_eigenvalue:.3e})"
        )


class NotSymmetric(ModelError):
    pass


class BreakpointOrder(ModelError):
    pass


class NegativeTime(ModelError):
    pass


class HypothesisViolation(GaussFlowError):
    """A structural hypothesis (H1-H5) fails for the model."""

    hypothesis = "H?"

    def __init__(self, message, residual=None, time=None):
        self.residual = residual
        self.time = time
        super().__init__(f"{self.hypothesis} violated: {message}")


class H1Violation(HypothesisViolation):
    hypothesis = "H1"


class H2Violation(HypothesisViolation):
    hypothesis = "H2"


class H3Violation(HypothesisViolation):
    hypothesis = "H3"


class H4Violation(HypothesisViolation):
    hypothesis = "H4"


class H5Violation(HypothesisViolation):
    hypothesis = "H5"


class NumericalError(GaussFlowError, ArithmeticError):
    pass


class BlowUp(NumericalError):
    pass


class PSDLost(NumericalError):
    pass


class NoStabilizingSolution(NumericalError):
    pass


class StepMisaligned(NumericalError, ValueError):
    pass


class SizeCap(NumericalError):
    pass


class DegenerateBeyondJitter(NumericalError):
    pass
