"""Input checks shared by the estimator and the command line."""

import numbers

import numpy as np

from .exceptions import DimensionMismatch
from .problem import NepvProblem


def check_problem(X):
    """Return ``X`` as a validated :class:`NepvProblem`.

    Accepts a problem instance, a 5-sequence ``(A, B, C, P, Q)`` or a
    mapping with those keys.
    """
    if isinstance(X, NepvProblem):
        return X
    if isinstance(X, dict):
        try:
            X = [X[name] for name in "ABCPQ"]
        except KeyError as exc:
            raise DimensionMismatch(f"problem mapping lacks matrix {exc.args[0]}") from None
    mats = list(X)
    if len(mats) != 5:
        raise DimensionMismatch("a problem needs exactly five matrices A, B, C, P, Q")
    return NepvProblem(*mats)


def check_shift(shift):
    if isinstance(shift, str):
        parts = [float(p) for p in shift.split(",")]
        if len(parts) > 2:
            raise ValueError(f"bad shift {shift!r}")
        shift = complex(parts[0], parts[1] if len(parts) == 2 else 0.0)
    if not isinstance(shift, numbers.Number) or not np.isfinite(shift):
        raise ValueError(f"shift must be a finite number, got {shift!r}")
    return complex(shift)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_iterations(value, name="max_iter"):
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
