"""Exception hierarchy shared across the package."""


class DQMSError(Exception):
    """Base class for all package errors."""


class DimensionError(DQMSError, ValueError):
    """Operand shapes or subsystem dimensions are inconsistent."""


class ChannelValidationError(DQMSError, ValueError):
    """A map failed complete-positivity or trace-preservation checks.

    Attributes
    ----------
    cp_defect : float
        Most negative Choi eigenvalue (sign flipped, 0 if CP).
    tp_defect : float
        Largest entry of ``|sum K^dag K - I|``.
    """

    def __init__(self, message, cp_defect=0.0, tp_defect=0.0):
        super().__init__(message)
        self.cp_defect = cp_defect
        self.tp_defect = tp_defect


class EigenConvergenceError(DQMSError, ArithmeticError):
    """The dense eigensolver did not converge."""


class StructureError(DQMSError):
    """Peripheral block decomposition or action recovery failed."""


class SolverError(DQMSError):
    """The SDP solver stopped without an optimal certificate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
