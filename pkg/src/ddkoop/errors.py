"""Exception types raised across the package."""


class LengthError(ValueError):
    """A sequence is shorter than the requested window length."""


class DimensionError(ValueError):
    """Array dimensions disagree with a model, library or problem."""


class ParameterError(ValueError):
    """Inconsistent configuration parameters (e.g. T_ini + N != L)."""


class DivergenceError(RuntimeError):
    """A simulation produced a non-finite or exploding state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InfeasibleError(RuntimeError):
    """An equality system or QP has no (numerically) feasible point."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual
