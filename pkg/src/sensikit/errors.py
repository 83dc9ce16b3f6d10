"""Exception types shared across the library."""


class SensikitError(Exception):
    """Base class for all library-specific failures."""


class NonSmoothPointError(SensikitError, ArithmeticError):
    """A lifted function was evaluated where it is not differentiable."""


class AnalyticityError(SensikitError, TypeError):
    """A non-analytic primitive was reached on the complex-step path."""


class NumericalBlowupError(SensikitError, ArithmeticError):
    """A non-finite value appeared during integration.

    Carries the time and stepsize at which the blowup was detected.
    """

    def __init__(self, message, t=None, dt=None):
        super().__init__(message)
        self.t = t
        self.dt = dt


class StepsizeUnderflowError(SensikitError, ArithmeticError):
    """The adaptive controller shrank the stepsize below resolvable size."""


class NonConvergenceError(SensikitError, RuntimeError):
    """The step budget was exhausted before reaching the end of the span."""


class DivergenceError(SensikitError, RuntimeError):
    """An optimization run increased the loss for too many iterations."""
