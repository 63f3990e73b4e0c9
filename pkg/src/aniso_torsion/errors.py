"""Exception types shared by the package."""


class TorsionError(Exception):
    """Base class for all errors raised by aniso_torsion."""


class DegenerateInput(TorsionError, ValueError):
    pass


class BadParameter(TorsionError, ValueError):
    pass


class BadBody(TorsionError, ValueError):
    pass


class OutsideBody(TorsionError, ValueError):
    pass


class UnsupportedDimension(TorsionError, ValueError):
    pass


class NoConvergence(TorsionError, RuntimeError):
    """Raised when the nonlinear solver exhausts its iteration budget.

    The partially converged state is kept in ``diagnostics`` so callers can
    decide whether the iterate is still usable.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
