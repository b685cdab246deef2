"""Compact linearization of the problem to the operator-determinant pencil.

The two-parameter system built from ``(A, B, C)`` and the bordered matrices
``Ahat, Bhat, Chat`` of order ``2n - 1`` is turned into the pencil
``(Delta1, Delta0)`` of order ``2n^2 - n``. Vectors of that size are stored
as ``z = vec([W; V])`` in column-major order, with ``W`` of shape
``(n-1, n)`` and ``V`` of shape ``(n, n)``. Nothing of size ``2n^2 - n``
squared is ever formed except by :func:`explicit_deltas`.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    RankDeficientR,
    ShiftIsEigenvalue,
    SingularOperator,
    TooLarge,
    ZeroVector,
)
from .linalg import SylvesterSolver, dense_gep_eig, rank_estimate
from .problem import (
    TOL_REAL,
    TOL_RES,
    CandidateSolution,
    Classification,
    make_candidate,
    nepv_residual,
    normalize_eigvec,
    mu_of,
)

EXPLICIT_MAX_N = 12


def complex_normal(rng, shape):
    """I.i.d. standard complex normal entries (unit variance per component)."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def make_R(n, r_spec="random", seed=0):
    """Auxiliary full-column-rank ``n x (n-1)`` matrix.

    ``r_spec`` is ``"random"`` (complex normal entries),
    ``"identity_plus_random_row"`` (identity on top, a random complex row
    appended last) or an explicit array. Randomness comes from
    ``numpy.random.default_rng(seed)`` (PCG64).
    """
    if isinstance(r_spec, str):
        rng = np.random.default_rng(seed)
        if r_spec == "random":
            R = complex_normal(rng, (n, n - 1))
        elif r_spec == "identity_plus_random_row":
            R = np.vstack([np.eye(n - 1), complex_normal(rng, (1, n - 1))])
        elif r_spec == "random_row_plus_identity":
            R = np.vstack([complex_normal(rng, (1, n - 1)), np.eye(n - 1)])
        else:
            raise ValueError(f"unknown r_spec {r_spec!r}")
    else:
        R = np.asarray(r_spec, dtype=complex)
    if R.shape != (n, n - 1):
        raise DimensionMismatch(f"R must be {n} x {n - 1}, got {R.shape}")
    if n > 1 and rank_estimate(R, 1e-12) < n - 1:
        raise RankDeficientR("R does not have full column rank")
    return R.astype(complex)


def _bordered(R, X, corner):
    n = X.shape[0]
    out = np.zeros((2 * n - 1, 2 * n - 1), dtype=complex)
    XR = X @ R
    out[: n - 1, n - 1:] = XR.conj().T
    out[n - 1:, : n - 1] = XR
    if corner is not None:
        out[n - 1:, n - 1:] = corner
    return out


@dataclass(frozen=True, eq=False)
class CompactLinearization:
    problem: object
    R: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    rng_seed: int = 0
    r_spec: str = "explicit"
    _solvers: dict = field(default_factory=dict, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return self.problem.n

    @property
    def size(self):
        n = self.n
        return 2 * n * n - n

    @property
    def shape_Z(self):
        return (2 * self.n - 1, self.n)

    def scale(self):
        """Rough norm of the Delta operators, for relative tolerances."""
        if "scale" not in self._cache:
            nrm = self.problem.norms
            nh = {k: float(np.linalg.norm(getattr(self, k), 2)) for k in ("Ahat", "Bhat", "Chat")}
            self._cache["scale"] = max(nrm["B"] * nh["Chat"] + nrm["C"] * nh["Bhat"],
                                       nrm["A"] * nh["Chat"] + nrm["C"] * nh["Ahat"])
        return self._cache["scale"]

    def sylvester_solver(self, sigma):
        """Cached factorization of ``Delta1 - sigma Delta0``."""
        key = complex(sigma)
        if key not in self._solvers:
            p = self.problem
            Gamma = p.A - sigma * p.B
            Gamma_hat = self.Ahat - sigma * self.Bhat
            self._solvers.clear()
            self._solvers[key] = SylvesterSolver(self.Chat, Gamma, Gamma_hat, p.C)
        return self._solvers[key]


def build_linearization(problem, r_spec="random", seed=0):
    """Assemble ``R`` and the bordered matrices for ``problem``."""
    n = problem.n
    if n < 2:
        raise DimensionMismatch("the linearization needs n >= 2")
    R = make_R(n, r_spec, seed)
    Ahat = _bordered(R, problem.A, problem.P)
    Bhat = _bordered(R, problem.B, None)
    Chat = _bordered(R, problem.C, problem.Q)
    for X in (Ahat, Bhat, Chat):
        X.setflags(write=False)
    return CompactLinearization(problem=problem, R=R, Ahat=Ahat, Bhat=Bhat, Chat=Chat, rng_seed=seed,
                                r_spec=r_spec if isinstance(r_spec, str) else "explicit")


# -- big-vector helpers -------------------------------------------------------


def unvec(z, n):
    z = np.asarray(z)
    if z.shape != (2 * n * n - n,):
        raise DimensionMismatch(f"vector of length {z.shape} does not match n = {n}")
    return z.reshape((2 * n - 1, n), order="F")


def vec(Z):
    return np.asarray(Z).reshape(-1, order="F")


def split(z, n):
    """Views ``(W, V)`` of the top ``(n-1) x n`` and bottom ``n x n`` blocks."""
    Z = unvec(z, n)
    return Z[: n - 1], Z[n - 1:]


def join(W, V):
    return vec(np.vstack([W, V]))


def v_asymmetry(z, n):
    """``||V - V^T|| / ||V||`` (0 for a zero V block)."""
    _, V = split(z, n)
    nv = np.linalg.norm(V)
    return 0.0 if nv == 0 else float(np.linalg.norm(V - V.T) / nv)


def in_Z(z, n, tol=1e-8):
    _, V = split(z, n)
    return bool(np.linalg.norm(V - V.T) <= tol * np.linalg.norm(V))


def in_W(z, R, tol=1e-8):
    n = R.shape[0]
    W, V = split(z, n)
    RW = R @ W
    return bool(np.linalg.norm(V) <= tol * np.linalg.norm(z) and np.linalg.norm(RW - RW.T) <= tol * np.linalg.norm(RW))


def project_onto_Z(z, n):
    """Replace the V block by its symmetric part; W is untouched."""
    Z = unvec(np.asarray(z, dtype=complex), n).copy()
    V = Z[n - 1:]
    Z[n - 1:] = (V + V.T) / 2
    return vec(Z)


def Z_basis(n):
    """Orthonormal basis of the structured subspace (dimension ``n^2 + n(n-1)/2``)."""
    m = 2 * n * n - n
    cols = []
    for j in range(n):
        for i in range(n - 1):
            Z = np.zeros((2 * n - 1, n), dtype=complex)
            Z[i, j] = 1
            cols.append(vec(Z))
    for j in range(n):
        for i in range(j + 1):
            Z = np.zeros((2 * n - 1, n), dtype=complex)
            if i == j:
                Z[n - 1 + i, j] = 1
            else:
                Z[n - 1 + i, j] = Z[n - 1 + j, i] = 1 / np.sqrt(2)
            cols.append(vec(Z))
    basis = np.column_stack(cols)
    assert basis.shape == (m, n * n + n * (n - 1) // 2)
    return basis


def W_basis(R):
    """Orthonormal basis of ``{vec([W; 0]) : R W symmetric}`` (dimension ``n(n-1)/2``)."""
    n = R.shape[0]
    # R W = R K R^T with K symmetric, so W = K R^T.
    cols = []
    for j in range(n - 1):
        for i in range(j + 1):
            K = np.zeros((n - 1, n - 1), dtype=complex)
            K[i, j] = K[j, i] = 1
            cols.append(join(K @ R.T, np.zeros((n, n), dtype=complex)))
    Y = np.column_stack(cols)
    # orthonormalize on the W rows only so the V block stays exactly zero
    mask = join(np.ones((n - 1, n)), np.zeros((n, n))).astype(bool)
    Qb = np.zeros_like(Y)
    Qb[mask] = np.linalg.qr(Y[mask])[0]
    return Qb


# -- operator determinants ----------------------------------------------------


class Delta(str, enum.Enum):
    DELTA0 = "Delta0"
    DELTA1 = "Delta1"
    DELTA2 = "Delta2"


def delta_apply(lin, which, z):
    """Apply one operator determinant to ``z`` (or to each column of ``z``).

    Delta0 z = vec(Chat Z B^T - Bhat Z C^T), Delta1 z = vec(Chat Z A^T -
    Ahat Z C^T), Delta2 z = vec(Ahat Z B^T - Bhat Z A^T).
    """
    which = Delta(which)
    z = np.asarray(z)
    if z.ndim == 2:
        return np.column_stack([delta_apply(lin, which, col) for col in z.T])
    if z.shape != (lin.size,):
        raise DimensionMismatch(f"expected a vector of length {lin.size}, got {z.shape}")
    p = lin.problem
    Z = unvec(z, lin.n)
    if which is Delta.DELTA0:
        X1, Y1, X2, Y2 = lin.Chat, p.B, lin.Bhat, p.C
    elif which is Delta.DELTA1:
        X1, Y1, X2, Y2 = lin.Chat, p.A, lin.Ahat, p.C
    else:
        X1, Y1, X2, Y2 = lin.Ahat, p.B, lin.Bhat, p.A
    return vec(X1 @ Z @ Y1.T - X2 @ Z @ Y2.T)


def explicit_deltas(lin):
    """Dense ``(Delta0, Delta1, Delta2)`` built from Kronecker products (small n only)."""
    if lin.n > EXPLICIT_MAX_N:
        raise TooLarge(f"explicit Delta matrices need n <= {EXPLICIT_MAX_N}, got {lin.n}")
    p = lin.problem
    D0 = np.kron(p.B, lin.Chat) - np.kron(p.C, lin.Bhat)
    D1 = np.kron(p.A, lin.Chat) - np.kron(p.C, lin.Ahat)
    D2 = np.kron(p.B, lin.Ahat) - np.kron(p.A, lin.Bhat)
    return D0, D1, D2


def shifted_solve(lin, sigma, rhs, allow_singular=True, return_mode=False):
    """Solve ``(Delta1 - sigma Delta0) z = rhs`` through a generalized Sylvester equation.

    In the singular regime a consistent system yields a particular
    solution; an inconsistent one raises :class:`ShiftIsEigenvalue`.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (lin.size,):
        raise DimensionMismatch(f"expected a vector of length {lin.size}, got {rhs.shape}")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side has non-finite entries")
    solver = lin.sylvester_solver(sigma)
    try:
        X = solver.solve(unvec(rhs, lin.n), allow_singular=allow_singular)
    except SingularOperator as exc:
        raise ShiftIsEigenvalue(sigma, str(exc)) from exc
    z = vec(X)
    if return_mode:
        return z, solver.last_mode
    return z


# -- singularity probe --------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    verdict: str
    rank_C: int
    sigma_min_ratio: float = float("nan")

    def __str__(self):
        if self.verdict == "singular_low_rank_C":
            return f"singular_low_rank_C({self.rank_C})"
        return self.verdict


def delta0_probe(lin, rank_tol=1e-10, alignment_tol=1e-10):
    """Classify ``Delta0`` as regular or singular.

    Low-rank C (rank < n - 1) always makes the whole pencil singular. The
    alignment test checks whether the rectangular pencil ``(CR, BR)`` has an
    eigenvalue: after compressing with the orthonormal basis ``U`` of
    ``range(BR)``, the square pencil ``(U^H C R, U^H B R)`` provides
    candidate eigenpairs ``(t, y)``, and the smallest relative residual
    ``||(CR - t BR) y||`` over those candidates decides. ``regular`` is
    therefore a generic verdict, not a certificate.
    """
    p = lin.problem
    n = p.n
    r = rank_estimate(p.C, rank_tol)
    if r < n - 1:
        return ProbeResult("singular_low_rank_C", r, 0.0)
    CR, BR = p.C @ lin.R, p.B @ lin.R
    U, _ = np.linalg.qr(BR)
    res = dense_gep_eig(U.conj().T @ CR, U.conj().T @ BR, check_singular=False)
    finite = np.isfinite(res.eigenvalues)
    t, Y = res.eigenvalues[finite], res.vectors[:, finite]
    worst = np.inf
    if t.size:
        resid = np.linalg.norm(CR @ Y - (BR @ Y) * t, axis=0)
        denom = (np.linalg.norm(CR, 2) + np.abs(t) * np.linalg.norm(BR, 2)) * np.linalg.norm(Y, axis=0)
        worst = float(np.min(resid / denom))
    verdict = "singular_R_alignment" if worst <= alignment_tol else "regular"
    return ProbeResult(verdict, r, float(worst))


def low_rank_null_vector(lin, tol=1e-10):
    """A common null vector ``Rx (x) [x; 0]`` of Delta0 and Delta1 when ``C R`` is rank deficient."""
    p = lin.problem
    n = p.n
    U, s, Vh = np.linalg.svd(p.C @ lin.R)
    if s[-1] > tol * max(s[0], np.finfo(float).tiny) and s[0] > 0:
        raise ValueError("C R has full column rank")
    x = Vh[-1].conj()
    w = np.concatenate([x, np.zeros(n, dtype=complex)])
    return np.kron(lin.R @ x, w)


# -- eigenvector classification -----------------------------------------------


def extract_eigvec(z, n, rank1_tol=1e-6):
    """Recover ``v`` from ``V ~ alpha v v^T``.

    Returns ``(v, ratio)`` where ``ratio = s2 / s1`` of the symmetrized V
    block measures the rank-one defect.
    """
    _, V = split(z, n)
    Vs = (V + V.T) / 2
    U, s, _ = np.linalg.svd(Vs)
    ratio = float(s[1] / s[0]) if n > 1 and s[0] > 0 else 0.0
    return U[:, 0], ratio


def classify_eigvec(lin, lam, z, tol_real=TOL_REAL, tol_res=TOL_RES, zero_tol=1e-8, sym_tol=1e-6,
                    rank1_tol=1e-6):
    """Turn an eigenvector of the pencil into a classified candidate solution.

    Order of tests: a vanishing V block marks the right rectangular family;
    a clearly non-symmetric V block marks the left rectangular family; a
    non-real ``lam`` marks a complex spurious value; otherwise ``v`` is read
    off V and the direct residual decides between genuine and unverified.
    """
    n = lin.n
    z = np.asarray(z, dtype=complex)
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ZeroVector("eigenvector must be nonzero")
    problem = lin.problem
    W, V = split(z, n)
    nv = np.linalg.norm(V)
    if nv <= zero_tol * nz:
        # W = x (Rx)^T, so every nonzero column is a multiple of x.
        col = W[:, int(np.argmax(np.linalg.norm(W, axis=0)))]
        v = lin.R @ col
        return _spurious(problem, lam, v, Classification.SPURIOUS_RIGHT_RMEP, v_norm_ratio=nv / nz)
    asym = np.linalg.norm(V - V.T) / nv
    if asym > sym_tol:
        cand = _kronecker_candidate(lin, lam, z, tol_real, tol_res, rank1_tol)
        if cand is not None:
            cand.extra.update(v_norm_ratio=nv / nz, asymmetry=asym)
            return cand
        v, _ = extract_eigvec(z, n)
        return _spurious(problem, lam, v, Classification.SPURIOUS_LEFT_RMEP, v_norm_ratio=nv / nz, asymmetry=asym)
    v, ratio = extract_eigvec(z, n)
    if abs(np.imag(lam)) > tol_real * (1 + abs(np.real(lam))):
        return _spurious(problem, lam, v, Classification.SPURIOUS_COMPLEX, v_norm_ratio=nv / nz, rank1_ratio=ratio)
    cand = make_candidate(problem, lam, v, tol_real=tol_real, tol_res=tol_res, v_norm_ratio=nv / nz,
                          rank1_ratio=ratio, asymmetry=asym)
    if cand.is_genuine and ratio > rank1_tol:
        cand = make_candidate(problem, lam, v, classification=Classification.UNVERIFIED, v_norm_ratio=nv / nz,
                              rank1_ratio=ratio, asymmetry=asym)
    return cand


def _kronecker_candidate(lin, lam, z, tol_real, tol_res, rank1_tol):
    """Genuine candidate from ``z = v (x) w`` when the V block is not symmetric.

    Happens inside multiple eigenvalues (e.g. ``C = 0``), where ``w`` need not
    end in a multiple of ``v``. Only a passing direct residual is accepted.
    """
    if abs(np.imag(lam)) > tol_real * (1 + abs(np.real(lam))):
        return None
    _, s, Vh = np.linalg.svd(unvec(z, lin.n))
    if s[1] > rank1_tol * s[0]:
        return None
    cand = make_candidate(lin.problem, lam, Vh[0], tol_real=tol_real, tol_res=tol_res, rank1_ratio=s[1] / s[0],
                          extraction="kronecker")
    return cand if cand.is_genuine else None


def _spurious(problem, lam, v, cls, **extra):
    if not np.any(v):
        v = np.ones(problem.n, dtype=complex)
    v = normalize_eigvec(problem, v)
    res_nepv, res_mu = nepv_residual(problem, lam, v)
    return CandidateSolution(lam=lam, mu=mu_of(problem, v), v=v, residual_nepv=res_nepv, residual_mu=res_mu,
                             classification=cls, extra=extra)


def solution_vector(lin, lam, mu, v, tol=1e-8):
    """Build ``z = v (x) [w1; alpha v]`` for a solution ``(lam, mu, v)``.

    ``[w1; alpha]`` spans the right null space of ``[M R, S v]``.
    """
    p = lin.problem
    v = np.asarray(v, dtype=complex)
    M = p.M(lam, mu)
    K = np.column_stack([M @ lin.R, p.S(mu) @ v])
    _, s, Vh = np.linalg.svd(K)
    y = Vh[-1].conj()
    w = np.concatenate([y[:-1], y[-1] * v])
    return np.kron(v, w)


# -- filtering hypothesis -----------------------------------------------------


def _selector_L(n):
    m = n - 1
    cols = []
    for j in range(m):
        for i in range(j + 1):
            e = np.zeros(m * m)
            e[j * m + i] = 1
            cols.append(e)
    return np.column_stack(cols)


def _antisymmetrizer_T(n):
    cols = []
    for j in range(n):
        for i in range(j):
            e = np.zeros(n * n)
            # e_j (x) e_i - e_i (x) e_j
            e[j * n + i] += 1
            e[i * n + j] -= 1
            cols.append(e)
    return np.column_stack(cols)


def lemma41_pencil(lin, sigma):
    """The reduced skew-symmetric pencil ``bold(A) - sigma bold(B)`` of order ``n(n-1)/2``.

    Its nonsingularity is the hypothesis under which the structured
    subspace is invariant under the shift-and-invert operator.
    """
    n = lin.n
    if n > EXPLICIT_MAX_N:
        raise TooLarge(f"lemma41_pencil needs n <= {EXPLICIT_MAX_N}")
    p = lin.problem
    L = _selector_L(n)
    T = _antisymmetrizer_T(n)
    RR = np.kron(lin.R.conj().T, lin.R.conj().T)
    G = p.A - sigma * p.B
    return L.T @ RR @ (np.kron(G, p.C) - np.kron(p.C, G)) @ T


def lemma41_matrices(lin):
    """``(bold A, bold B)`` with ``lemma41_pencil(sigma) = bold A - sigma bold B``."""
    A0 = lemma41_pencil(lin, 0.0)
    B0 = A0 - lemma41_pencil(lin, 1.0)
    return A0, B0
