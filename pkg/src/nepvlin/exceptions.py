"""Exception hierarchy shared by every module of the package."""

import numpy as np


class NepvError(Exception):
    """Base class for all errors raised by nepvlin."""


class DimensionMismatch(NepvError, ValueError):
    pass


class NotHermitian(NepvError, ValueError):
    def __init__(self, which, deviation=None):
        self.which = which
        self.deviation = deviation
        msg = f"matrix {which} is not Hermitian"
        if deviation is not None:
            msg += f" (||X - X^H||_F = {deviation:.3e})"
        super().__init__(msg)


class NotPositiveDefinite(NepvError, np.linalg.LinAlgError):
    def __init__(self, which=None):
        self.which = which
        name = f"matrix {which}" if which else "matrix"
        super().__init__(f"{name} is not positive definite")


class NoConvergence(NepvError, np.linalg.LinAlgError):
    pass


class SingularOperator(NepvError, np.linalg.LinAlgError):
    """Raised by the Sylvester solver when its Kronecker operator is singular.

    ``mode`` is ``"inconsistent"`` when no solution exists. The
    ``"consistent-underdetermined"`` mode is only raised when the caller
    refuses particular solutions (``allow_singular=False``).
    """

    def __init__(self, mode, detail=""):
        self.mode = mode
        super().__init__(f"singular Sylvester operator ({mode}){': ' + detail if detail else ''}")


class SingularPencil(NepvError, np.linalg.LinAlgError):
    pass


class ProjectedPencilSingular(SingularPencil):
    pass


class ZeroVector(NepvError, ValueError):
    pass


class EmptyNullSpace(NepvError, ValueError):
    pass


class RankDeficientR(NepvError, ValueError):
    pass


class TooLarge(NepvError, ValueError):
    pass


class ShiftIsEigenvalue(NepvError, np.linalg.LinAlgError):
    def __init__(self, sigma, detail=""):
        self.sigma = sigma
        super().__init__(f"shift {sigma} is (numerically) an eigenvalue{': ' + detail if detail else ''}")
