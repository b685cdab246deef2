"""Estimator-style front end to :func:`run_solver`."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .arnoldi import RunConfig, run_solver
from .validation import check_iterations, check_positive, check_problem, check_shift


class NEPvSolver(BaseEstimator):
    """Eigenpairs of ``A v = lam B v + (v^H P v / v^H Q v) C v`` near a shift.

    Parameters
    ----------
    algorithm : {"filtering", "two-sided", "standard", "auto"}
        Krylov variant. ``"auto"`` picks ``"standard"`` when the pencil is
        singular because ``C`` has low rank and ``"filtering"`` otherwise.
    shift : complex
        Target around which eigenvalues are sought.
    max_iter : int
        Largest Krylov basis size.
    tol_conv, tol_res : float
        Ritz-value stability and NEPv residual tolerances.
    seed : int
        Seeds the auxiliary matrix and the starting vector.
    r_spec : str
        Construction of the auxiliary matrix, see :func:`make_R`.
    stop_after_genuine : int, optional
        Stop once this many distinct eigenpairs are verified.

    Attributes
    ----------
    eigenvalues_ : ndarray of shape (k,)
    mus_ : ndarray of shape (k,)
    eigenvectors_ : ndarray of shape (n, k)
        Unit ``B``-norm eigenvectors, one per column.
    residuals_ : ndarray of shape (k,)
    solutions_ : list of CandidateSolution
    n_iter_ : int
    convergence_log_ : ConvergenceLog
    """

    def __init__(self, algorithm="filtering", shift=0.0, max_iter=100, tol_conv=1e-8, tol_res=1e-8, seed=0,
                 r_spec="random", stop_after_genuine=None):
        self.algorithm = algorithm
        self.shift = shift
        self.max_iter = max_iter
        self.tol_conv = tol_conv
        self.tol_res = tol_res
        self.seed = seed
        self.r_spec = r_spec
        self.stop_after_genuine = stop_after_genuine

    def fit(self, X, y=None):
        """Solve the problem ``X`` (a NepvProblem or the five matrices)."""
        problem = check_problem(X)
        config = RunConfig(
            algorithm=self.algorithm,
            shift=check_shift(self.shift),
            max_iter=check_iterations(self.max_iter),
            tol_conv=check_positive(self.tol_conv, "tol_conv"),
            tol_res=check_positive(self.tol_res, "tol_res"),
            seed=self.seed,
            r_spec=self.r_spec,
            stop_after_genuine=self.stop_after_genuine,
        )
        result = run_solver(problem, config)
        sols = result.solutions
        self.solutions_ = sols
        self.eigenvalues_ = np.array([s.lam for s in sols], dtype=float)
        self.mus_ = np.array([s.mu for s in sols], dtype=float)
        self.eigenvectors_ = (np.column_stack([s.v for s in sols]) if sols
                              else np.zeros((problem.n, 0), dtype=complex))
        self.residuals_ = np.array([s.residual_nepv for s in sols])
        self.n_iter_ = result.state.iteration
        self.convergence_log_ = result.log
        self.result_ = result
        return self

    def nearest(self, target=None):
        """The fitted solution closest to ``target`` (default: the shift)."""
        check_is_fitted(self, "solutions_")
        if not self.solutions_:
            raise ValueError("no eigenpair was found")
        t = check_shift(self.shift if target is None else target)
        return min(self.solutions_, key=lambda s: abs(s.lam - t))
