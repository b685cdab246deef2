"""Dense complex linear-algebra kernels.

Everything here works on plain ``numpy`` arrays. Tolerances are relative to
norms of the inputs; no kernel uses an absolute threshold.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DimensionMismatch,
    NoConvergence,
    NotHermitian,
    NotPositiveDefinite,
    SingularOperator,
    SingularPencil,
)

EPS = np.finfo(float).eps


def as_complex_matrix(X, name="matrix"):
    X = np.asarray(X)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be non-empty")
    X = X.astype(complex, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def hermitian_deviation(X):
    return float(np.linalg.norm(X - X.conj().T))


def as_hermitian(X, name="matrix", tol=1e-12):
    """Return a copy of ``X`` symmetrized exactly, or raise NotHermitian.

    ``tol`` is relative to ``||X||_F``.
    """
    X = as_complex_matrix(X, name)
    if X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {X.shape}")
    dev = hermitian_deviation(X)
    if dev > tol * max(np.linalg.norm(X), np.finfo(float).tiny):
        raise NotHermitian(name, dev)
    return (X + X.conj().T) / 2


def cholesky(H, name=None):
    """Lower Cholesky factor ``L`` with ``L @ L^H == H``.

    The diagonal of ``L`` is real and positive. Raises NotPositiveDefinite
    when a pivot is not positive.
    """
    H = as_complex_matrix(H, name or "H")
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatch("cholesky needs a square matrix")
    try:
        L = sla.cholesky(H, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(name) from exc
    d = np.diag(L)
    if np.any(d.real <= 0) or not np.all(np.isfinite(d)):
        raise NotPositiveDefinite(name)
    return L


@dataclass(frozen=True)
class SchurPair:
    """Generalized Schur form ``A = Q S Z^H``, ``B = Q T Z^H``.

    ``alphas[i] / betas[i]`` is the eigenvalue sitting at diagonal
    position ``i`` of ``(S, T)``.
    """

    S: np.ndarray
    T: np.ndarray
    Q: np.ndarray
    Z: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray

    def eigenvalues(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.betas != 0, self.alphas / np.where(self.betas != 0, self.betas, 1), np.inf)


def _eig_sort_key(alpha, beta, scale_b):
    if abs(beta) <= 1e-14 * scale_b:
        return (1, np.inf, 0.0)
    lam = alpha / beta
    return (0, round(abs(lam), 12), round(float(np.angle(lam)), 12))


def generalized_schur(A, B, sort=True):
    """Complex QZ decomposition of the pencil ``(A, B)``.

    With ``sort=True`` the diagonal is reordered so that eigenvalues appear
    by increasing modulus, then argument; infinite eigenvalues come last.
    """
    A = as_complex_matrix(A, "A")
    B = as_complex_matrix(B, "B")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("generalized_schur needs two square matrices of equal order")
    n = A.shape[0]
    try:
        S, T, Q, Z = sla.qz(A, B, output="complex", check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoConvergence(str(exc)) from exc
    if sort and n > 1:
        scale_b = max(np.linalg.norm(B), np.finfo(float).tiny)
        # Move the m smallest keys to the front, one extra eigenvalue per
        # pass. LAPACK keeps the relative order inside the selected cluster.
        for m in range(1, n):
            diag_keys = [_eig_sort_key(a, b, scale_b) for a, b in zip(np.diag(S), np.diag(T))]
            current = sorted(range(n), key=lambda i: diag_keys[i])
            chosen = set(current[:m])
            mask = np.zeros(n, dtype=bool)
            mask[list(chosen)] = True
            if np.all(mask[:m]):
                continue
            S, T, _, _, Qn, Zn = sla.ordqz(S, T, sort=lambda a, b, _m=mask.copy(): _m, output="complex")
            Q = Q @ Qn
            Z = Z @ Zn
    return SchurPair(S=S, T=T, Q=Q, Z=Z, alphas=np.diag(S).copy(), betas=np.diag(T).copy())


class SylvesterSolver:
    """Factor-once solver for ``A X B^T - C X D^T = E``.

    ``A, C`` are ``p x p`` and ``B, D`` are ``q x q``. The outer pencil is
    reduced to generalized Schur form by QZ. The inner pencil is reduced the
    same way, except when it is Hermitian with a definite second matrix: it
    is then diagonalized through a Cholesky factor and a Hermitian
    eigen-decomposition, which is stable and turns every step of the
    back-substitution into an elementwise division. Each :meth:`solve` costs
    ``O(p q^2 + p^2 q)``. The orientation is chosen so that the inner pencil
    is the smaller one.

    When a pivot vanishes (the two pencils share an eigenvalue) the operator
    is singular. Up to ``dense_limit`` unknowns the equation is then solved
    as a whole by minimum-norm least squares on the Kronecker form, using an
    SVD computed once; beyond that each deficient triangular step is solved
    by minimum-norm least squares, which can fail to find a solution of a
    consistent system. Either way ``last_mode`` becomes
    ``"consistent-underdetermined"`` and an inconsistent right-hand side
    raises :class:`SingularOperator` with mode ``"inconsistent"``.
    """

    block = 32
    dense_limit = 2500

    def __init__(self, A, B, C, D, singular_tol=1e-12, consistency_tol=1e-8, inner="auto"):
        A = as_complex_matrix(A, "A")
        B = as_complex_matrix(B, "B")
        C = as_complex_matrix(C, "C")
        D = as_complex_matrix(D, "D")
        p, q = A.shape[0], B.shape[0]
        if A.shape != (p, p) or C.shape != (p, p) or B.shape != (q, q) or D.shape != (q, q):
            raise DimensionMismatch("A, C must be p x p and B, D must be q x q")
        if inner not in ("auto", "schur"):
            raise ValueError("inner must be 'auto' or 'schur'")
        self.p, self.q = p, q
        original = (A, B, C, D)
        self.transposed = p < q
        if self.transposed:
            A, B, C, D = B, A, D, C
        self.scale = np.linalg.norm(A, 2) * np.linalg.norm(B, 2) + np.linalg.norm(C, 2) * np.linalg.norm(D, 2)
        self.singular_tol = singular_tol
        self.consistency_tol = consistency_tol
        try:
            S1, T1, Q1, Z1 = sla.qz(A, C, output="complex", check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NoConvergence(str(exc)) from exc
        self._S1, self._T1 = S1, T1
        self._left = Q1.conj().T
        self._Z1 = Z1
        diag = None
        if inner == "auto":
            diag = _definite_diagonalization(B, D)
        if diag is not None:
            s2, t2, Winv = diag
            self.inner = "diagonal"
            self._s2, self._t2 = s2, t2
            self._right = Winv.T
            self._back = Winv.conj()
            d2s, d2t = s2, t2
        else:
            try:
                S2, T2, Q2, Z2 = sla.qz(B, D, output="complex", check_finite=False)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NoConvergence(str(exc)) from exc
            self.inner = "schur"
            self._S2, self._T2 = S2, T2
            self._right = Q2.conj()
            self._back = Z2.T
            d2s, d2t = np.diag(S2), np.diag(T2)
        d1s, d1t = np.diag(S1), np.diag(T1)
        self._pivots = d1s[:, None] * d2s[None, :] - d1t[:, None] * d2t[None, :]
        self._zero_pivot = np.abs(self._pivots) <= singular_tol * self.scale
        self.singular_rows = np.flatnonzero(np.any(self._zero_pivot, axis=1))
        self.last_mode = "regular"
        self._dense = None
        if self.is_singular and p * q <= self.dense_limit:
            A0, B0, C0, D0 = original
            K = np.kron(B0, A0) - np.kron(D0, C0)
            U, sv, Vh = np.linalg.svd(K)
            rank = int(np.sum(sv > singular_tol * sv[0]))
            self._dense = (K, U[:, :rank], sv[:rank], Vh[:rank])

    @property
    def is_singular(self):
        return self.singular_rows.size > 0

    def solve(self, E, allow_singular=True):
        E = np.asarray(E, dtype=complex)
        if E.shape != (self.p, self.q):
            raise DimensionMismatch(f"E must be {self.p} x {self.q}, got {E.shape}")
        if self.transposed:
            E = E.T
        if self.is_singular and not allow_singular:
            raise SingularOperator("consistent-underdetermined", "operator has zero pivots")
        if self._dense is not None:
            return self._dense_solve(E.T if self.transposed else E)
        F = self._left @ E @ self._right
        Y, mode = self._back_substitute(F)
        X = self._Z1 @ Y @ self._back
        self.last_mode = mode
        return X.T if self.transposed else X

    def _dense_solve(self, E):
        K, U, sv, Vh = self._dense
        e = E.reshape(-1, order="F")
        x = Vh.conj().T @ ((U.conj().T @ e) / sv)
        resid = np.linalg.norm(K @ x - e)
        if resid > self.consistency_tol * (np.linalg.norm(e) + self.scale * np.linalg.norm(x)):
            raise SingularOperator("inconsistent", f"least-squares residual {resid:.3e}")
        self.last_mode = "consistent-underdetermined"
        return x.reshape(self.p, self.q, order="F")

    def _back_substitute(self, F):
        S1, T1 = self._S1, self._T1
        m, k = F.shape
        diagonal = self.inner == "diagonal"
        Y = np.zeros((m, k), dtype=complex)
        G = np.zeros((m, k), dtype=complex)
        H = np.zeros((m, k), dtype=complex)
        mode = "regular"
        fnorm = np.linalg.norm(F)
        for i1 in range(m, 0, -self.block):
            i0 = max(0, i1 - self.block)
            R = F[i0:i1].copy()
            if i1 < m:
                R -= S1[i0:i1, i1:] @ G[i1:]
                R += T1[i0:i1, i1:] @ H[i1:]
            for i in range(i1 - 1, i0 - 1, -1):
                r = R[i - i0]
                if i + 1 < i1:
                    r = r - S1[i, i + 1:i1] @ G[i + 1:i1] + T1[i, i + 1:i1] @ H[i + 1:i1]
                a, c = S1[i, i], T1[i, i]
                zero = self._zero_pivot[i]
                if diagonal:
                    piv = self._pivots[i]
                    y = np.zeros(k, dtype=complex)
                    ok = ~zero
                    y[ok] = r[ok] / piv[ok]
                    if zero.any():
                        bad = np.abs(r[zero]).max()
                        if bad > self.consistency_tol * (fnorm + self.scale * np.linalg.norm(Y)):
                            raise SingularOperator("inconsistent", f"row {i} residual {bad:.3e}")
                        mode = "consistent-underdetermined"
                    Y[i] = y
                    G[i] = y * self._s2
                    H[i] = y * self._t2
                    continue
                M = a * self._S2
                M -= c * self._T2
                if zero.any():
                    y = _min_norm_solve(M, r, self.singular_tol * self.scale)
                    resid = np.linalg.norm(M @ y - r)
                    bound = self.consistency_tol * (fnorm + self.scale * (np.linalg.norm(Y) + np.linalg.norm(y)))
                    if resid > bound:
                        raise SingularOperator("inconsistent", f"row {i} residual {resid:.3e}")
                    mode = "consistent-underdetermined"
                else:
                    y = sla.solve_triangular(M, r, lower=False, check_finite=False)
                Y[i] = y
                G[i] = self._S2 @ y
                H[i] = self._T2 @ y
        return Y, mode


def _definite_diagonalization(B, D, herm_tol=1e-14):
    """Diagonalize a Hermitian pencil ``(B, D)`` with ``D`` or ``-D`` definite.

    Returns ``(s, t, Winv)`` with ``B = W diag(s) W^H`` and
    ``D = W diag(t) W^H``, or ``None`` when the structure is absent.
    """
    nb, nd = np.linalg.norm(B), np.linalg.norm(D)
    if nd == 0:
        return None
    if hermitian_deviation(B) > herm_tol * nb or hermitian_deviation(D) > herm_tol * nd:
        return None
    Dh = (D + D.conj().T) / 2
    for sign in (1.0, -1.0):
        try:
            L = sla.cholesky(sign * Dh, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        d = np.abs(np.diag(L))
        # Reject nearly singular factors; the Schur path handles those.
        if d.min() <= 1e-6 * d.max():
            return None
        Linv = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
        K = Linv @ ((B + B.conj().T) / 2) @ Linv.conj().T
        theta, U = np.linalg.eigh((K + K.conj().T) / 2)
        Winv = U.conj().T @ Linv
        return theta.astype(complex), np.full(theta.shape, sign, dtype=complex), Winv
    return None


def _min_norm_solve(M, r, abs_tol):
    U, s, Vh = np.linalg.svd(M)
    keep = s > abs_tol
    coef = (U[:, keep].conj().T @ r) / s[keep]
    return Vh[keep].conj().T @ coef


def solve_generalized_sylvester(A, B, C, D, E, allow_singular=True, return_mode=False):
    """Solve ``A X B^T - C X D^T = E`` by a Bartels-Stewart style method.

    Returns ``X`` (and the solve mode when ``return_mode``). The mode is
    ``"regular"`` or ``"consistent-underdetermined"``; in the latter case
    ``X`` is the particular solution that is minimum-norm on the deficient
    directions of each triangular step.
    """
    solver = SylvesterSolver(A, B, C, D)
    X = solver.solve(E, allow_singular=allow_singular)
    if return_mode:
        return X, solver.last_mode
    return X


def rank_estimate(M, tol=1e-10):
    """Number of singular values above ``tol * sigma_max``."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(M, tol=1e-8):
    """Orthonormal basis of the numerical null space (relative threshold)."""
    M = np.asarray(M)
    U, s, Vh = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return Vh[rank:].conj().T


@dataclass(frozen=True)
class GepResult:
    """Eigen-decomposition of a dense pencil.

    ``eigenvalues`` holds ``inf`` where ``infinite`` is set. Columns of
    ``vectors`` are unit-norm right eigenvectors.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    infinite: np.ndarray
    indeterminate: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    def finite(self):
        keep = ~(self.infinite | self.indeterminate)
        return self.eigenvalues[keep], self.vectors[:, keep]


def dense_gep_eig(A, B, tol=1e-12, singular_fraction=0.1, check_singular=True):
    """All eigenpairs of ``A x = lambda B x``, sorted by modulus then argument.

    Pairs with ``|beta| <= tol ||B||`` are flagged infinite. If more than
    ``singular_fraction`` of the pairs have both ``alpha`` and ``beta``
    negligible the pencil is declared singular.
    """
    A = as_complex_matrix(A, "A")
    B = as_complex_matrix(B, "B")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("dense_gep_eig needs two square matrices of equal order")
    w, V = sla.eig(A, B, homogeneous_eigvals=True, check_finite=False)
    alphas, betas = w[0], w[1]
    na = max(np.linalg.norm(A), np.finfo(float).tiny)
    nb = max(np.linalg.norm(B), np.finfo(float).tiny)
    small_a = np.abs(alphas) <= tol * na
    small_b = np.abs(betas) <= tol * nb
    indeterminate = small_a & small_b
    if check_singular and indeterminate.sum() > singular_fraction * len(alphas):
        raise SingularPencil(f"{int(indeterminate.sum())} of {len(alphas)} eigenvalue pairs are 0/0")
    infinite = small_b & ~indeterminate
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(small_b, np.inf, alphas / np.where(small_b, 1, betas))
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    order = sorted(range(len(lam)), key=lambda i: (bool(small_b[i]), abs(lam[i]) if np.isfinite(lam[i]) else 0.0,
                                                     float(np.angle(lam[i])) if np.isfinite(lam[i]) else 0.0))
    order = np.asarray(order, dtype=int)
    return GepResult(
        eigenvalues=lam[order],
        vectors=V[:, order],
        alphas=alphas[order],
        betas=betas[order],
        infinite=infinite[order],
        indeterminate=indeterminate[order],
    )


def hermitian_definite_eig(A, B):
    """Eigenpairs of a Hermitian pencil with ``B`` positive definite.

    Reduces to a standard Hermitian problem with the Cholesky factor of
    ``B``; eigenvectors come back B-orthonormal, eigenvalues ascending.
    """
    A = as_hermitian(A, "A", tol=1e-10)
    B = as_hermitian(B, "B", tol=1e-10)
    L = cholesky(B, "B")
    Linv_A = sla.solve_triangular(L, A, lower=True)
    K = sla.solve_triangular(L, Linv_A.conj().T, lower=True)
    w, U = np.linalg.eigh((K + K.conj().T) / 2)
    V = sla.solve_triangular(L.conj().T, U, lower=False)
    return w, V
