"""Shift-and-invert Arnoldi solvers for the operator-determinant pencil.

Three variants share one loop:

* filtering: iterates stay in the structured subspace (V block symmetric);
  Ritz values come from the Hessenberg matrix through ``lam = sigma + 1/theta``.
* two-sided: same basis, Ritz values from the projected Hermitian pencil
  ``(Z^H Delta1 Z, Z^H Delta0 Z)``.
* standard: no projection step, for the singular pencil produced by a
  low-rank ``C``; each shifted solve returns a particular solution.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NepvError, ProjectedPencilSingular, ShiftIsEigenvalue, SingularPencil
from .linalg import dense_gep_eig
from .linearization import (
    Delta,
    build_linearization,
    classify_eigvec,
    complex_normal,
    delta0_probe,
    delta_apply,
    join,
    project_onto_Z,
    shifted_solve,
    v_asymmetry,
)
from .problem import (
    DEDUPE_TOL,
    TOL_REAL,
    TOL_RES,
    Classification,
    dedupe,
    make_candidate,
    newton_refine,
    validate,
)

log = logging.getLogger(__name__)

THETA_MIN = 1e-14


def random_start_in_Z(n, seed=0):
    """Unit-norm random vector whose V block is exactly symmetric."""
    rng = np.random.default_rng(seed)
    W = complex_normal(rng, (n - 1, n))
    V = complex_normal(rng, (n, n))
    V = (V + V.T) / 2
    z = join(W, V)
    return z / np.linalg.norm(z)


def random_start(n, seed=0):
    rng = np.random.default_rng(seed)
    z = complex_normal(rng, (2 * n * n - n,))
    return z / np.linalg.norm(z)


# -- Ritz data ----------------------------------------------------------------


@dataclass
class RitzSet:
    theta: np.ndarray
    lam: np.ndarray
    residual_estimate: np.ndarray
    vectors: np.ndarray  # coordinates in the Krylov basis, one column per value
    history_id: np.ndarray = None

    def __len__(self):
        return len(self.lam)


@dataclass
class KrylovState:
    sigma: complex
    mode: str
    basis: np.ndarray  # (m, capacity); the first ``nbasis`` columns are valid
    H: np.ndarray  # (capacity, capacity - 1) Hessenberg coefficients
    iteration: int = 0
    breakdown: bool = False
    asymmetry: list = field(default_factory=list)
    solve_residuals: list = field(default_factory=list)
    solve_modes: list = field(default_factory=list)
    H0: np.ndarray = None
    H1: np.ndarray = None

    @property
    def nbasis(self):
        return self.iteration + 1 if not self.breakdown else self.iteration

    @property
    def Z(self):
        return self.basis[:, : self.nbasis]

    @property
    def H_square(self):
        k = self.iteration
        return self.H[:k, :k]

    @property
    def beta_last(self):
        k = self.iteration
        return self.H[k, k - 1] if k >= 1 and not self.breakdown else 0.0

    def orthonormality_error(self):
        Z = self.Z
        return float(np.linalg.norm(Z.conj().T @ Z - np.eye(Z.shape[1])))


@dataclass
class ConvergenceLog:
    """Per-iteration Ritz records.

    ``records`` holds tuples ``(k, track_id, lam, residual_estimate)``;
    :meth:`rows` adds the distance to the track's final value.
    """

    records: list = field(default_factory=list)
    singularity: list = field(default_factory=list)  # (k, sigma_min / sigma_max) for the two-sided pencil
    converged_at: dict = field(default_factory=dict)  # track_id -> first iteration meeting the criterion

    def append(self, k, track_id, lam, residual_estimate):
        self.records.append((int(k), int(track_id), complex(lam), float(residual_estimate)))

    def final_values(self):
        last = {}
        for k, tid, lam, _ in self.records:
            last[tid] = lam
        return last

    def rows(self):
        ref = self.final_values()
        return [
            {
                "iter": k,
                "track_id": tid,
                "lambda_re": lam.real,
                "lambda_im": lam.imag,
                "abs_error_vs_final": abs(lam - ref[tid]),
                "residual_estimate": res,
            }
            for k, tid, lam, res in self.records
        ]

    def track(self, track_id):
        return [(k, lam) for k, tid, lam, _ in self.records if tid == track_id]


class TrackMatcher:
    """Greedy nearest-neighbour matching of Ritz values across iterations.

    A new value joins an existing track only if it is closer than half its
    distance to the nearest other new value; otherwise it starts a track.
    """

    def __init__(self, tol_conv=1e-8, window=3):
        self.tol_conv = tol_conv
        self.window = window
        self._next = 0
        self.last = {}  # track id -> lam at previous iteration
        self.stable = {}  # track id -> consecutive small steps
        self.converged_at = {}

    def update(self, k, lams):
        lams = np.asarray(lams, dtype=complex)
        m = len(lams)
        ids = np.full(m, -1, dtype=int)
        if m:
            gaps = np.full(m, np.inf)
            if m > 1:
                d = np.abs(lams[:, None] - lams[None, :])
                np.fill_diagonal(d, np.inf)
                gaps = d.min(axis=1)
            old = list(self.last.items())
            pairs = []
            for j, lam in enumerate(lams):
                for tid, prev in old:
                    dist = abs(lam - prev)
                    if dist <= 0.5 * gaps[j]:
                        pairs.append((dist, j, tid))
            pairs.sort()
            used = set()
            for dist, j, tid in pairs:
                if ids[j] < 0 and tid not in used:
                    ids[j] = tid
                    used.add(tid)
        new_last, new_stable = {}, {}
        for j, lam in enumerate(lams):
            tid = int(ids[j])
            if tid < 0:
                tid = self._next
                self._next += 1
                ids[j] = tid
                new_stable[tid] = 0
            else:
                step = abs(lam - self.last[tid])
                small = step <= self.tol_conv * (1 + abs(lam))
                new_stable[tid] = self.stable.get(tid, 0) + 1 if small else 0
                if new_stable[tid] >= self.window and tid not in self.converged_at:
                    self.converged_at[tid] = k
            new_last[tid] = lam
        self.last, self.stable = new_last, new_stable
        return ids

    def force_converged(self, k, ids):
        for tid in ids:
            self.stable[int(tid)] = self.window
            self.converged_at.setdefault(int(tid), k)

    def is_converged(self, tid):
        return self.stable.get(tid, 0) >= self.window


# -- Ritz extraction ----------------------------------------------------------


def hessenberg_ritz(H, beta, sigma):
    """Ritz data from a square Hessenberg matrix of the shift-inverted operator."""
    k = H.shape[0]
    if k == 0:
        return RitzSet(np.zeros(0, complex), np.zeros(0, complex), np.zeros(0), np.zeros((0, 0), complex))
    theta, Y = np.linalg.eig(H)
    Y = Y / np.linalg.norm(Y, axis=0, keepdims=True)
    keep = np.abs(theta) > THETA_MIN
    theta, Y = theta[keep], Y[:, keep]
    lam = sigma + 1 / theta
    res = np.abs(beta * Y[-1, :]) / np.abs(theta) ** 2 if k else np.zeros(0)
    order = np.argsort(np.abs(lam - sigma), kind="stable")
    return RitzSet(theta[order], lam[order], res[order], Y[:, order])


def ritz_values(state):
    """Ritz set of a filtering/standard Krylov state from its Hessenberg matrix."""
    if state.iteration < 1:
        raise ValueError("need at least one Arnoldi step")
    return hessenberg_ritz(state.H_square, state.beta_last, state.sigma)


def deflated_pencil_eig(H1, H0, tol=1e-10):
    """Eigenpairs of a Hermitian pencil after removing its common null space.

    Directions ``y`` with ``H0 y = H1 y = 0`` make the pencil singular; they
    are split off with an SVD of ``[H0; H1]`` using a threshold relative to
    the largest singular value. Returns ``(lams, Y, nullity)`` with ``Y`` in
    the original coordinates. Indeterminate or infinite pairs of the
    remaining pencil are dropped.
    """
    k = H0.shape[0]
    if k == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex), 0
    stacked = np.vstack([H0, H1])
    _, s, Vh = np.linalg.svd(stacked)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    U = Vh[:rank].conj().T
    if rank == 0:
        return np.zeros(0, complex), np.zeros((k, 0), complex), k
    G1 = U.conj().T @ H1 @ U
    G0 = U.conj().T @ H0 @ U
    res = dense_gep_eig(G1, G0, tol=tol, check_singular=False)
    keep = ~(res.infinite | res.indeterminate)
    return res.eigenvalues[keep], U @ res.vectors[:, keep], k - rank


def projected_pencil(lin, Z):
    """``(H1, H0) = (Z^H Delta1 Z, Z^H Delta0 Z)``; both Hermitian."""
    D1Z = delta_apply(lin, Delta.DELTA1, Z)
    D0Z = delta_apply(lin, Delta.DELTA0, Z)
    H1 = Z.conj().T @ D1Z
    H0 = Z.conj().T @ D0Z
    for H in (H0, H1):
        dev = np.linalg.norm(H - H.conj().T)
        assert dev <= 1e-12 * max(np.linalg.norm(H), 1.0) * max(1, Z.shape[1]), dev
    return (H1 + H1.conj().T) / 2, (H0 + H0.conj().T) / 2


def two_sided_ritz(lin, state_or_Z, deflate=True, tol=1e-10):
    """Ritz values of the two-sided projection of ``(Delta1, Delta0)``.

    With ``deflate=False`` a singular projected pencil raises
    :class:`ProjectedPencilSingular`; with deflation its common null space is
    removed first and the remaining eigenvalues are returned.
    """
    Z = state_or_Z.Z if isinstance(state_or_Z, KrylovState) else np.asarray(state_or_Z)
    if isinstance(state_or_Z, KrylovState) and state_or_Z.H0 is not None:
        k = Z.shape[1]
        H1, H0 = state_or_Z.H1[:k, :k], state_or_Z.H0[:k, :k]
    else:
        H1, H0 = projected_pencil(lin, Z)
    if deflate:
        lam, Y, _ = deflated_pencil_eig(H1, H0, tol)
    else:
        try:
            res = dense_gep_eig(H1, H0, tol=tol)
        except SingularPencil as exc:
            raise ProjectedPencilSingular(str(exc)) from exc
        keep = ~(res.infinite | res.indeterminate)
        lam, Y = res.eigenvalues[keep], res.vectors[:, keep]
    sigma = state_or_Z.sigma if isinstance(state_or_Z, KrylovState) else 0.0
    order = np.argsort(np.abs(lam - sigma), kind="stable")
    lam, Y = lam[order], Y[:, order]
    with np.errstate(divide="ignore"):
        theta = 1 / (lam - sigma)
    return RitzSet(theta, lam, np.full(len(lam), np.nan), Y)


def pencil_singularity(H1, H0, rho):
    """``sigma_min(H0 + rho H1) / sigma_max`` of the projected pencil."""
    s = np.linalg.svd(H0 + rho * H1, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


# -- the Arnoldi loop ---------------------------------------------------------


@dataclass
class ArnoldiOptions:
    extraction: str = "hessenberg"  # or "two-sided"
    project: bool = True
    tol_conv: float = 1e-8
    window: int = 3
    breakdown_tol: float = 1e-14
    check_solve: bool = False
    singular_policy: str = "deflate"  # or "stop"
    singular_stop_tol: float = 1e-12
    deflation_tol: float = 1e-10
    rho_seed: int = 12345
    record_ritz: bool = True
    stop: object = None  # callable(k, state, ritz, matcher) -> bool


def _arnoldi(lin, sigma, z0, k_max, opts):
    n = lin.n
    m = lin.size
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    z0 = np.asarray(z0, dtype=complex)
    if opts.project:
        z0 = project_onto_Z(z0, n)
    z0 = z0 / np.linalg.norm(z0)
    cap = k_max + 1
    basis = np.zeros((m, cap), dtype=complex, order="F")
    basis[:, 0] = z0
    state = KrylovState(sigma=complex(sigma), mode="filtering" if opts.project else "standard", basis=basis,
                        H=np.zeros((cap, k_max), dtype=complex))
    two_sided = opts.extraction == "two-sided"
    if two_sided:
        state.H0 = np.zeros((cap, cap), dtype=complex)
        state.H1 = np.zeros((cap, cap), dtype=complex)
        rho = np.random.default_rng(opts.rho_seed).standard_normal()
    clog = ConvergenceLog()
    matcher = TrackMatcher(opts.tol_conv, opts.window)
    scale = lin.scale()

    d0 = delta_apply(lin, Delta.DELTA0, z0)
    if two_sided:
        d1 = delta_apply(lin, Delta.DELTA1, z0)
        state.H0[0, 0] = np.vdot(z0, d0).real
        state.H1[0, 0] = np.vdot(z0, d1).real
    healthy = None
    for k in range(1, k_max + 1):
        try:
            zh, mode = shifted_solve(lin, sigma, d0, return_mode=True)
        except ShiftIsEigenvalue:
            log.error("shifted solve failed at iteration %d", k)
            raise
        state.solve_modes.append(mode)
        if opts.check_solve:
            lhs = delta_apply(lin, Delta.DELTA1, zh) - sigma * delta_apply(lin, Delta.DELTA0, zh)
            state.solve_residuals.append(float(np.linalg.norm(lhs - d0) / (scale * max(np.linalg.norm(zh), 1e-300))))
        if opts.project:
            state.asymmetry.append(v_asymmetry(zh, n))
        # modified Gram-Schmidt, one unconditional reorthogonalization pass
        h = np.zeros(k, dtype=complex)
        for _ in range(2):
            for i in range(k):
                c = np.vdot(basis[:, i], zh)
                zh -= c * basis[:, i]
                h[i] += c
        beta = np.linalg.norm(zh)
        state.H[:k, k - 1] = h
        state.H[k, k - 1] = beta
        if beta <= opts.breakdown_tol * max(np.linalg.norm(h), 1.0):
            state.iteration = k
            state.breakdown = True
            log.info("Arnoldi breakdown at iteration %d (invariant subspace)", k)
            if opts.record_ritz:
                # the subspace is invariant, so every Ritz value is exact
                if two_sided:
                    ritz = two_sided_ritz(lin, state, deflate=True, tol=opts.deflation_tol)
                else:
                    ritz = hessenberg_ritz(state.H[:k, :k], 0.0, sigma)
                ritz.history_id = matcher.update(k, ritz.lam)
                matcher.force_converged(k, ritz.history_id)
                for tid, lam, res in zip(ritz.history_id, ritz.lam, ritz.residual_estimate):
                    clog.append(k, tid, lam, res)
                healthy = ritz
                if opts.stop is not None:
                    opts.stop(k, state, ritz, matcher)
            break
        zk = zh / beta
        if opts.project:
            zk = project_onto_Z(zk, n)
        basis[:, k] = zk
        state.iteration = k
        d0 = delta_apply(lin, Delta.DELTA0, zk)
        if two_sided:
            d1 = delta_apply(lin, Delta.DELTA1, zk)
            Zk = basis[:, : k + 1]
            c0 = Zk.conj().T @ d0
            c1 = Zk.conj().T @ d1
            state.H0[: k + 1, k] = c0
            state.H0[k, : k + 1] = c0.conj()
            state.H0[k, k] = c0[k].real
            state.H1[: k + 1, k] = c1
            state.H1[k, : k + 1] = c1.conj()
            state.H1[k, k] = c1[k].real
            ratio = pencil_singularity(state.H1[: k + 1, : k + 1], state.H0[: k + 1, : k + 1], rho)
            clog.singularity.append((k, ratio))
            if ratio < opts.singular_stop_tol and opts.singular_policy == "stop":
                log.info("projected pencil numerically singular at k=%d; stopping", k)
                state.iteration = k
                break
        if opts.record_ritz:
            if two_sided:
                ritz = two_sided_ritz(lin, state, deflate=True, tol=opts.deflation_tol)
            else:
                ritz = hessenberg_ritz(state.H[:k, :k], beta, sigma)
            ritz.history_id = matcher.update(k, ritz.lam)
            for tid, lam, res in zip(ritz.history_id, ritz.lam, ritz.residual_estimate):
                clog.append(k, tid, lam, res)
            healthy = ritz
            if opts.stop is not None and opts.stop(k, state, ritz, matcher):
                break
    clog.converged_at = dict(matcher.converged_at)
    state.matcher = matcher
    state.last_ritz = healthy
    return state, clog


def filtering_arnoldi(lin, sigma, z0, k_max, opts=None, **kw):
    """Shift-and-invert Arnoldi restricted to the structured subspace.

    Every new direction is orthogonalized, normalized and then projected
    back onto the structured subspace so rounding cannot drift out of it.
    Returns ``(KrylovState, ConvergenceLog)``.
    """
    opts = opts or ArnoldiOptions(**kw)
    opts.project = True
    return _arnoldi(lin, sigma, z0, k_max, opts)


def standard_arnoldi_singular(lin, sigma, z0, k_max, opts=None, **kw):
    """Shift-and-invert Arnoldi without projection, for the singular pencil.

    Each shifted system is singular but consistent when ``sigma`` is not an
    eigenvalue; the Sylvester solver returns a particular solution.
    """
    opts = opts or ArnoldiOptions(**kw)
    opts.project = False
    return _arnoldi(lin, sigma, z0, k_max, opts)


def ritz_vectors(state, ritz, columns=None):
    """Map Ritz coordinates back to full vectors ``z = Z y``."""
    cols = range(len(ritz)) if columns is None else columns
    Y = ritz.vectors[:, list(cols)]
    k = Y.shape[0]
    return state.basis[:, :k] @ Y


# -- orchestration ------------------------------------------------------------


@dataclass
class RunConfig:
    algorithm: str = "filtering"  # filtering | two-sided | standard | auto
    shift: complex = 0.0
    max_iter: int = 100
    tol_conv: float = 1e-8
    tol_res: float = TOL_RES
    tol_real: float = TOL_REAL
    seed: int = 0
    r_spec: str = "random"
    r_seed: int = None
    stop_after_genuine: int = None
    refine: bool = True
    singular_policy: str = "deflate"
    output_dir: str = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.tol_conv <= 0 or self.tol_res <= 0 or self.tol_real <= 0:
            raise ValueError("tolerances must be positive")
        if self.algorithm not in ("filtering", "two-sided", "standard", "auto"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class SolverResult:
    solutions: list
    log: object
    state: object
    linearization: object
    probe: object
    candidates: list = field(default_factory=list)
    first_genuine_iteration: dict = field(default_factory=dict)  # lam -> iteration
    tracks: dict = field(default_factory=dict)  # track id -> classified candidate

    @property
    def genuine_tracks(self):
        return sorted(tid for tid, c in self.tracks.items() if c.is_genuine)


def certify(problem, cand, tol_real=TOL_REAL, tol_res=TOL_RES, max_steps=6):
    """Polish an unverified real candidate with Newton steps on the NEPv.

    Ritz values often converge well before Ritz vectors. The candidate is
    promoted to genuine only if the polished pair passes the residual test
    and ``lam`` moved by less than the deduplication tolerance.
    """
    if cand.classification is not Classification.UNVERIFIED:
        return cand
    lam0 = float(np.real(cand.lam))
    try:
        lam, v, steps = newton_refine(problem, lam0, cand.v, max_steps=max_steps, tol=tol_res * 1e-2)
    except np.linalg.LinAlgError:
        return cand
    if not abs(lam - lam0) <= DEDUPE_TOL * (1 + abs(lam0)):
        return cand
    polished = make_candidate(problem, lam, v, tol_real=tol_real, tol_res=tol_res, ritz_lambda=lam0,
                              ritz_residual=cand.residual_nepv, newton_steps=steps)
    return polished if polished.is_genuine else cand


def run_solver(problem, config=None, linearization=None):
    """Build, probe, iterate and verify.

    Returns a :class:`SolverResult` whose ``solutions`` are the distinct
    genuine eigenpairs among converged Ritz tracks, sorted by distance to
    the shift. ``candidates`` keeps every classified converged track.
    """
    config = config or RunConfig()
    validate(problem)
    lin = linearization or build_linearization(problem, config.r_spec,
                                               config.seed if config.r_seed is None else config.r_seed)
    probe = delta0_probe(lin)
    algorithm = config.algorithm
    if algorithm == "auto":
        algorithm = "filtering" if probe.verdict == "regular" else "standard"
    if algorithm in ("filtering", "two-sided") and probe.verdict == "singular_low_rank_C":
        raise SingularPencil(f"Delta0 probe reports {probe}; use the standard algorithm")
    sigma = config.shift
    n = problem.n
    classified = {}  # track id -> CandidateSolution
    genuine_first = {}

    def classify_converged(k, state, ritz, matcher):
        fresh = [j for j, tid in enumerate(ritz.history_id) if matcher.is_converged(tid) and tid not in classified]
        if fresh:
            Zs = ritz_vectors(state, ritz, fresh)
            for col, j in enumerate(fresh):
                tid = int(ritz.history_id[j])
                cand = classify_eigvec(lin, ritz.lam[j], Zs[:, col], tol_real=config.tol_real, tol_res=config.tol_res)
                if config.refine:
                    cand = certify(problem, cand, config.tol_real, config.tol_res)
                classified[tid] = cand
                if cand.is_genuine and tid not in genuine_first:
                    genuine_first[tid] = k

    def stop(k, state, ritz, matcher):
        classify_converged(k, state, ritz, matcher)
        if config.stop_after_genuine:
            found = dedupe([c for c in classified.values() if c.is_genuine])
            return len(found) >= config.stop_after_genuine
        return False

    opts = ArnoldiOptions(
        extraction="two-sided" if algorithm == "two-sided" else "hessenberg",
        tol_conv=config.tol_conv,
        singular_policy=config.singular_policy,
        stop=stop,
    )
    if algorithm == "standard":
        z0 = random_start(n, config.seed)
        state, clog = standard_arnoldi_singular(lin, sigma, z0, config.max_iter, opts)
    else:
        z0 = random_start_in_Z(n, config.seed)
        state, clog = filtering_arnoldi(lin, sigma, z0, config.max_iter, opts)
    # tracks that converged in the final iterations are classified with the last Ritz set
    if state.last_ritz is not None:
        classify_converged(state.iteration, state, state.last_ritz, state.matcher)
    candidates = list(classified.values())
    genuine = dedupe([c for c in candidates if c.is_genuine])
    genuine.sort(key=lambda c: abs(c.lam - sigma))
    first = {}
    for tid, k in genuine_first.items():
        lam = classified[tid].lam
        key = next((g.lam for g in genuine if abs(g.lam - lam) <= 1e-6 * (1 + abs(lam))), lam)
        first[key] = min(k, first.get(key, k))
    log.info("%s: %d iterations, %d genuine solutions", algorithm, state.iteration, len(genuine))
    return SolverResult(solutions=genuine, log=clog, state=state, linearization=lin, probe=probe,
                        candidates=candidates, first_genuine_iteration=first, tracks=dict(classified))


__all__ = [
    "ArnoldiOptions",
    "ConvergenceLog",
    "KrylovState",
    "NepvError",
    "RitzSet",
    "RunConfig",
    "SolverResult",
    "filtering_arnoldi",
    "random_start",
    "random_start_in_Z",
    "ritz_values",
    "run_solver",
    "standard_arnoldi_singular",
    "two_sided_ritz",
]
