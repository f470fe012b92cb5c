"""Exception hierarchy shared by all modules."""


class ContractaError(Exception):
    """Base class for every error raised by this package."""


class InputError(ContractaError, ValueError):
    """Invalid arguments: wrong shapes, non-finite entries, violated invariants."""


class NumericalError(ContractaError, RuntimeError):
    """A numerical procedure failed to deliver a trustworthy result."""


class DivergenceError(NumericalError):
    """Integration stopped early (step underflow or step budget exhausted).

    The last accepted time and state are kept on the exception.
    """

    def __init__(self, message, t_last=None, state_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.state_last = state_last


class NoConvergenceError(NumericalError):
    """An iterative solver stalled; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
