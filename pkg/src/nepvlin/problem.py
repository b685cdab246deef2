"""The eigenvector-nonlinear problem ``A v = lam B v + (v^H P v / v^H Q v) C v``.

Holds the data model, residual and ``mu`` evaluation, the bivariate
polynomial pair ``(det M, trace(S adj M))``, the null-space definiteness
filter and the solution-count bound.
"""

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DimensionMismatch, EmptyNullSpace, ZeroVector
from .linalg import as_hermitian, cholesky

TOL_REAL = 1e-8
TOL_RES = 1e-8
TOL_RANK = 1e-8
DEDUPE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class NepvProblem:
    """Five coefficient matrices of order ``n``.

    ``A, C, P`` must be Hermitian and ``B, Q`` Hermitian positive definite.
    The constructor symmetrizes each matrix exactly after checking it is
    Hermitian to a relative tolerance of ``1e-12``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = None
        for name in "ABCPQ":
            X = as_hermitian(getattr(self, name), name)
            if n is None:
                n = X.shape[0]
            elif X.shape[0] != n:
                raise DimensionMismatch(f"matrix {name} has order {X.shape[0]}, expected {n}")
            X.setflags(write=False)
            object.__setattr__(self, name, X)
        if n < 1:
            raise DimensionMismatch("problem order must be positive")
        cholesky(self.B, "B")
        cholesky(self.Q, "Q")

    @property
    def n(self):
        return self.A.shape[0]

    @cached_property
    def norms(self):
        """Spectral norms of ``(A, B, C, P, Q)``."""
        return {name: float(np.linalg.norm(getattr(self, name), 2)) for name in "ABCPQ"}

    def M(self, lam, mu):
        return self.A - lam * self.B - mu * self.C

    def S(self, mu):
        return self.P - mu * self.Q

    def matrices(self):
        return self.A, self.B, self.C, self.P, self.Q


def validate(problem):
    """Re-run every structural check on ``problem``.

    Raises NotHermitian, NotPositiveDefinite or DimensionMismatch. Accepts
    a :class:`NepvProblem` or any 5-sequence of matrices.
    """
    if isinstance(problem, NepvProblem):
        mats = problem.matrices()
    else:
        mats = tuple(problem)
        if len(mats) != 5:
            raise DimensionMismatch("a problem needs exactly five matrices A, B, C, P, Q")
    NepvProblem(*mats)


class Classification(str, enum.Enum):
    GENUINE = "genuine"
    SPURIOUS_RIGHT_RMEP = "spurious_right_rmep"
    SPURIOUS_LEFT_RMEP = "spurious_left_rmep"
    SPURIOUS_COMPLEX = "spurious_complex"
    REJECTED_DEFINITENESS = "rejected_definiteness"
    UNVERIFIED = "unverified"


@dataclass(frozen=True, eq=False)
class CandidateSolution:
    lam: complex
    mu: complex
    v: np.ndarray
    residual_nepv: float
    residual_mu: float
    classification: Classification
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def is_genuine(self):
        return self.classification is Classification.GENUINE

    def same_as(self, other, tol=DEDUPE_TOL):
        return same_solution(self.lam, self.mu, other.lam, other.mu, tol)

    def to_dict(self):
        return {
            "lambda": [float(np.real(self.lam)), float(np.imag(self.lam))],
            "mu": [float(np.real(self.mu)), float(np.imag(self.mu))],
            "v": [[float(x.real), float(x.imag)] for x in np.asarray(self.v, dtype=complex)],
            "residual_nepv": float(self.residual_nepv),
            "residual_mu": float(self.residual_mu),
            "classification": self.classification.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            lam=complex(*d["lambda"]),
            mu=complex(*d["mu"]),
            v=np.array([complex(*x) for x in d["v"]]),
            residual_nepv=float(d["residual_nepv"]),
            residual_mu=float(d["residual_mu"]),
            classification=Classification(d["classification"]),
        )


def same_solution(lam1, mu1, lam2, mu2, tol=DEDUPE_TOL):
    return abs(lam1 - lam2) <= tol * (1 + abs(lam1)) and abs(mu1 - mu2) <= tol * (1 + abs(mu1))


def dedupe(solutions, tol=DEDUPE_TOL):
    """Keep the first occurrence of each solution, preferring small residuals."""
    kept = []
    for sol in sorted(solutions, key=lambda s: s.residual_nepv):
        if not any(sol.same_as(k, tol) for k in kept):
            kept.append(sol)
    return kept


def _check_vector(problem, v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape[0] != problem.n:
        raise DimensionMismatch(f"vector has length {v.shape[0]}, expected {problem.n}")
    if not np.any(v):
        raise ZeroVector("eigenvector must be nonzero")
    return v


def mu_of(problem, v):
    """The Rayleigh-quotient ratio ``v^H P v / v^H Q v`` (real for Hermitian data)."""
    v = _check_vector(problem, v)
    num = np.vdot(v, problem.P @ v)
    den = np.vdot(v, problem.Q @ v)
    mu = num / den
    # Hermitian P, Q: any imaginary part is rounding only.
    bound = 1e-12 * (abs(mu) + problem.norms["P"] * np.vdot(v, v).real / abs(den)) + 1e-15
    assert abs(mu.imag) <= bound, f"mu has imaginary part {mu.imag:.3e}"
    return float(mu.real)


def nepv_residual(problem, lam, v, mu=None):
    """Relative residuals ``(residual_nepv, residual_mu)``.

    ``mu`` defaults to :func:`mu_of`; supplying it externally turns
    ``residual_mu`` into a consistency check.
    """
    v = _check_vector(problem, v)
    mu_v = mu_of(problem, v)
    if mu is None:
        mu = mu_v
    nrm = problem.norms
    vn = np.linalg.norm(v)
    r = problem.A @ v - lam * (problem.B @ v) - mu_v * (problem.C @ v)
    res_nepv = np.linalg.norm(r) / ((nrm["A"] + abs(lam) * nrm["B"] + abs(mu_v) * nrm["C"]) * vn)
    res_mu = abs(np.vdot(v, problem.P @ v) - mu * np.vdot(v, problem.Q @ v)) / ((nrm["P"] + abs(mu) * nrm["Q"]) * vn**2)
    return float(res_nepv), float(res_mu)


def normalize_eigvec(problem, v):
    """Scale ``v`` to unit B-norm with its largest entry real positive."""
    v = _check_vector(problem, v)
    v = v / np.sqrt(np.vdot(v, problem.B @ v).real)
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    v[k] = v[k].real
    return v


def adjugate(M, inv_threshold=1e-8):
    """Adjugate of a square matrix.

    Uses ``det(M) inv(M)`` when ``M`` is well conditioned and otherwise the
    SVD form ``det(U) conj(det(V)) V diag(prod_{j != i} s_j) U^H``, which
    stays accurate at and near rank deficiency.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    U, s, Vh = np.linalg.svd(M)
    if s[0] > 0 and s[-1] > inv_threshold * s[0]:
        return np.linalg.det(M) * np.linalg.inv(M)
    # Products of all singular values except one, without division.
    prefix = np.concatenate(([1.0], np.cumprod(s[:-1])))
    suffix = np.concatenate((np.cumprod(s[::-1][:-1])[::-1], [1.0]))
    others = prefix * suffix
    phase = np.linalg.det(U) * np.conj(np.linalg.det(Vh.conj().T))
    return phase * (Vh.conj().T * others) @ U.conj().T


def eval_polynomials(problem, lam, mu):
    """Values ``f = det M(lam, mu)`` and ``g = trace(S(mu) adj M(lam, mu))``."""
    M = problem.M(lam, mu)
    f = complex(np.linalg.det(M))
    g = complex(np.trace(problem.S(mu) @ adjugate(M)))
    return f, g


def polynomial_scale(problem, lam, mu):
    """Natural magnitude for ``f`` and ``g`` at ``(lam, mu)``."""
    nrm = problem.norms
    m = nrm["A"] + abs(lam) * nrm["B"] + abs(mu) * nrm["C"]
    s = nrm["P"] + abs(mu) * nrm["Q"]
    n = problem.n
    return max(m**n, s * m ** (n - 1))


def definiteness_filter(problem, lam, mu, tol_rank=TOL_RANK, tol_zero=1e-10):
    """Decide whether a real root ``(lam, mu)`` of the polynomial pair is an eigenvalue.

    Returns True (accept) when the null-space compression of ``S(mu)`` is
    indefinite or singular, or when the null space is one-dimensional.
    """
    M = problem.M(lam, mu)
    U, s, Vh = np.linalg.svd(M)
    if s[0] == 0:
        k = problem.n
    else:
        k = int(np.sum(s <= tol_rank * s[0]))
    if k == 0:
        raise EmptyNullSpace(f"M({lam}, {mu}) is numerically nonsingular")
    if k == 1:
        return True
    V = Vh[problem.n - k:].conj().T
    Shat = V.conj().T @ problem.S(mu) @ V
    w = np.linalg.eigvalsh((Shat + Shat.conj().T) / 2)
    scale = max(np.abs(w).max(), np.finfo(float).tiny)
    if np.any(np.abs(w) <= tol_zero * max(scale, np.linalg.norm(problem.S(mu), 2))):
        return True
    return bool(w.min() < 0 < w.max())


def solution_count_bound(n, rank_c):
    """Upper bound ``min(n^2, n(2r+1) - r(r+1))`` on the number of eigenvalues."""
    if not 0 <= rank_c <= n:
        raise ValueError("rank_c must lie in [0, n]")
    r = rank_c
    return min(n * n, n * (2 * r + 1) - r * (r + 1))


def newton_refine(problem, lam, v, max_steps=6, tol=TOL_RES * 1e-2):
    """Newton iteration on ``(A - lam B - mu(v) C) v = 0`` in real arithmetic.

    ``mu(v)`` is not holomorphic, so the unknowns are ``(Re v, Im v, lam)``;
    the update is kept orthogonal to ``v`` (norm and phase gauge) and solved
    in the least-squares sense. Returns ``(lam, v, steps)``.
    """
    A, B, C, P, Q = problem.matrices()
    v = _check_vector(problem, v)
    v = v / np.linalg.norm(v)
    lam = float(np.real(lam))
    n = problem.n
    steps = 0
    for steps in range(1, max_steps + 1):
        den = np.vdot(v, Q @ v).real
        mu = np.vdot(v, P @ v).real / den
        M = A - lam * B - mu * C
        F = M @ v
        Bv, Cv = B @ v, C @ v
        g = 2 * ((P - mu * Q) @ v) / den
        J = np.zeros((2 * n + 2, 2 * n + 1))
        J[:n, :n], J[:n, n : 2 * n] = M.real, -M.imag
        J[n : 2 * n, :n], J[n : 2 * n, n : 2 * n] = M.imag, M.real
        J[: 2 * n, :n] -= np.outer(np.concatenate([Cv.real, Cv.imag]), g.real)
        J[: 2 * n, n : 2 * n] -= np.outer(np.concatenate([Cv.real, Cv.imag]), g.imag)
        J[:n, 2 * n], J[n : 2 * n, 2 * n] = -Bv.real, -Bv.imag
        J[2 * n, :n], J[2 * n, n : 2 * n] = v.real, v.imag
        J[2 * n + 1, :n], J[2 * n + 1, n : 2 * n] = -v.imag, v.real
        rhs = -np.concatenate([F.real, F.imag, [0.0, 0.0]])
        d = np.linalg.lstsq(J, rhs, rcond=None)[0]
        v = v + d[:n] + 1j * d[n : 2 * n]
        v = v / np.linalg.norm(v)
        lam += d[2 * n]
        if nepv_residual(problem, lam, v)[0] <= tol:
            break
    return lam, v, steps


def make_candidate(problem, lam, v, classification=None, tol_real=TOL_REAL, tol_res=TOL_RES, **extra):
    """Normalize ``v``, evaluate ``mu`` and residuals, and classify.

    Without an explicit ``classification`` the candidate is genuine when
    ``lam`` is real and the residual passes, ``spurious_complex`` when
    ``lam`` is not real, and ``unverified`` otherwise.
    """
    v = normalize_eigvec(problem, v)
    mu = mu_of(problem, v)
    res_nepv, res_mu = nepv_residual(problem, lam, v)
    if classification is None:
        if abs(np.imag(lam)) > tol_real * (1 + abs(np.real(lam))):
            classification = Classification.SPURIOUS_COMPLEX
        elif res_nepv <= tol_res:
            classification = Classification.GENUINE
        else:
            classification = Classification.UNVERIFIED
    if classification is Classification.GENUINE:
        lam = float(np.real(lam))
    return CandidateSolution(lam=lam, mu=mu, v=v, residual_nepv=res_nepv, residual_mu=res_mu,
                             classification=classification, extra=extra)

