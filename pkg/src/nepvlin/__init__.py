"""Eigenvector-nonlinear eigenproblems through a compact linearization.

Solves ``A v = lam B v + (v^H P v / v^H Q v) C v`` with Hermitian ``A, C, P``
and Hermitian positive definite ``B, Q`` by Krylov methods on a pencil of
size ``2 n^2 - n`` whose spectrum contains every eigenvalue.
"""

from .arnoldi import (
    ConvergenceLog,
    KrylovState,
    RitzSet,
    RunConfig,
    SolverResult,
    filtering_arnoldi,
    random_start_in_Z,
    ritz_values,
    run_solver,
    standard_arnoldi_singular,
    two_sided_ritz,
)
from .estimator import NEPvSolver
from .exceptions import *  # noqa: F401,F403
from .generators import gen_example1, gen_example2, gen_example3, gen_false_root, gen_four_solutions
from .linearization import (
    CompactLinearization,
    Delta,
    build_linearization,
    classify_eigvec,
    delta0_probe,
    delta_apply,
    explicit_deltas,
    shifted_solve,
)
from .problem import (
    CandidateSolution,
    Classification,
    NepvProblem,
    definiteness_filter,
    eval_polynomials,
    mu_of,
    nepv_residual,
    solution_count_bound,
    validate,
)
from .reference import ScfConfig, cross_validate, dense_reference_solve, scf_multistart

__version__ = "0.1.0"
