"""Independent reference solutions for small problems.

``dense_reference_solve`` computes the whole spectrum of the explicit
operator-determinant pencil; ``scf_multistart`` runs the self-consistent
field fixed-point iteration from many random starts. Neither shares code
with the Krylov solvers beyond the operator definitions.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import TooLarge
from .linalg import dense_gep_eig, hermitian_definite_eig
from .linearization import Delta, classify_eigvec, delta_apply, explicit_deltas
from .problem import (
    DEDUPE_TOL,
    Classification,
    dedupe,
    make_candidate,
    mu_of,
    same_solution,
)

log = logging.getLogger(__name__)

MAX_DENSE_N = 8


@dataclass
class ReferenceSpectrum:
    """All eigenpairs of ``(Delta1, Delta0)`` with their classification.

    ``mus`` holds the least-squares quotient of ``(Delta2 z, Delta0 z)``;
    ``candidates[i]`` is the classified candidate built from ``vectors[:, i]``.
    """

    lams: np.ndarray
    mus: np.ndarray
    vectors: np.ndarray
    candidates: list
    residuals: np.ndarray
    singular: bool = False
    deflated: int = 0

    def __len__(self):
        return len(self.lams)

    def genuine(self):
        out = [c for c in self.candidates if c.is_genuine]
        return sorted(dedupe(out), key=lambda c: c.lam)

    def count(self, classification):
        return sum(c.classification is Classification(classification) for c in self.candidates)

    def v_block_ratios(self, n):
        nz = np.linalg.norm(self.vectors, axis=0)
        blocks = self.vectors.reshape(2 * n - 1, n, -1, order="F")
        nv = np.linalg.norm(blocks[n - 1 :], axis=(0, 1))
        return nv / nz


def _common_range(D0, D1, tol):
    """Orthonormal basis of the orthogonal complement of ``ker D0 & ker D1``."""
    _, s, Vh = np.linalg.svd(np.vstack([D0, D1]))
    rank = int(np.sum(s > tol * s[0]))
    return Vh[:rank].conj().T, D0.shape[0] - rank


def dense_reference_solve(lin, tol=1e-12, null_tol=1e-10, tol_res=1e-8):
    """Full spectrum of the compact linearization by dense QZ.

    Each eigenvector is classified with :func:`classify_eigvec`. When the
    pencil is singular, the common null space of ``Delta0`` and ``Delta1``
    is removed by restricting both to its orthogonal complement first.
    """
    if lin.n > MAX_DENSE_N:
        raise TooLarge(f"dense reference limited to n <= {MAX_DENSE_N}, got n = {lin.n}")
    D0, D1, D2 = explicit_deltas(lin)
    scale = lin.scale()
    U, deflated = _common_range(D0, D1, null_tol)
    singular = deflated > 0
    if singular:
        res = dense_gep_eig(U.conj().T @ D1 @ U, U.conj().T @ D0 @ U, tol=tol, check_singular=False)
    else:
        res = dense_gep_eig(D1, D0, tol=tol)
    keep = ~(res.infinite | res.indeterminate)
    lams = res.eigenvalues[keep]
    Zs = res.vectors[:, keep]
    if singular:
        Zs = U @ Zs
    Zs = Zs / np.linalg.norm(Zs, axis=0, keepdims=True)
    d0 = D0 @ Zs
    d1 = D1 @ Zs
    d2 = D2 @ Zs
    resid = np.linalg.norm(d1 - d0 * lams, axis=0) / scale
    mus = np.einsum("ij,ij->j", d0.conj(), d2) / np.einsum("ij,ij->j", d0.conj(), d0)
    if np.any(resid > tol_res):
        log.warning("dense reference: %d eigenpairs above residual tolerance", int(np.sum(resid > tol_res)))
    candidates = []
    for j, lam in enumerate(lams):
        cand = classify_eigvec(lin, lam, Zs[:, j])
        cand.extra["mu_pencil"] = complex(mus[j])
        if cand.is_genuine:
            cand.extra["mu_mismatch"] = abs(mus[j] - cand.mu) / (1 + abs(cand.mu))
        candidates.append(cand)
    return ReferenceSpectrum(lams=lams, mus=mus, vectors=Zs, candidates=candidates, residuals=resid,
                             singular=singular, deflated=deflated)


def check_reference_entry(lin, lam, z):
    """Relative residual ``||(Delta1 - lam Delta0) z|| / (scale ||z||)`` through the matrix-free route."""
    r = delta_apply(lin, Delta.DELTA1, z) - lam * delta_apply(lin, Delta.DELTA0, z)
    return float(np.linalg.norm(r) / (lin.scale() * np.linalg.norm(z)))


# -- self-consistent field iteration ------------------------------------------


@dataclass
class ScfConfig:
    """Settings for :func:`scf_multistart`.

    ``branches`` lists the 1-based eigenpair indices of the inner linear
    problem to follow; ``None`` sweeps all ``n``.
    """

    max_outer: int = 500
    damping: float = 1.0
    min_damping: float = 0.125
    branches: tuple = None
    tol_fix: float = 1e-12
    tol_keep: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol_fix <= 0:
            raise ValueError("tol_fix must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass
class ScfStats:
    runs: int = 0
    converged: int = 0
    kept: int = 0
    dropped: int = 0


def _bnormalize(B, v):
    return v / np.sqrt(np.vdot(v, B @ v).real)


def scf_run(problem, v0, branch, cfg):
    """One fixed-point run following inner eigenpair ``branch`` (0-based).

    Returns ``(v, lam, converged)``.
    """
    A, B, C = problem.A, problem.B, problem.C
    v = _bnormalize(B, np.asarray(v0, dtype=complex))
    damping = cfg.damping
    prev_step = None
    prev_v = None
    lam = np.nan
    for _ in range(cfg.max_outer):
        mu = mu_of(problem, v)
        w, Y = hermitian_definite_eig(A - mu * C, B)
        y = Y[:, branch]
        lam = w[branch]
        overlap = np.vdot(y, B @ v)
        if abs(overlap) > 0:
            y = y * (abs(overlap) / overlap)
        v_new = _bnormalize(B, (1 - damping) * v + damping * y)
        step = np.linalg.norm(v_new - v)
        if step <= cfg.tol_fix:
            return v_new, lam, True
        if prev_v is not None and damping > cfg.min_damping and np.linalg.norm(v_new - prev_v) < prev_step / 10:
            damping = max(damping / 2, cfg.min_damping)
        prev_v, prev_step = v, step
        v = v_new
    return v, lam, False


def scf_multistart(problem, trials=16, cfg=None, return_stats=False):
    """Collect NEPv solutions by SCF from ``trials`` random starts on every branch.

    Candidates are kept only if their direct residual is at most
    ``cfg.tol_keep``; the result is deduplicated and sorted by ``lam``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cfg = cfg or ScfConfig()
    n = problem.n
    branches = range(n) if cfg.branches is None else [j - 1 for j in cfg.branches]
    rng = np.random.default_rng(cfg.seed)
    stats = ScfStats()
    found = []
    for _ in range(trials):
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for j in branches:
            stats.runs += 1
            v, lam, ok = scf_run(problem, v0, j, cfg)
            stats.converged += ok
            cand = make_candidate(problem, lam, v, tol_res=cfg.tol_keep, branch=j + 1)
            if cand.is_genuine:
                found.append(cand)
            else:
                stats.dropped += 1
    out = sorted(dedupe(found), key=lambda c: (c.lam, c.mu))
    stats.kept = len(out)
    log.info("scf: %d runs, %d converged, %d distinct solutions", stats.runs, stats.converged, stats.kept)
    return (out, stats) if return_stats else out


# -- comparison ---------------------------------------------------------------


@dataclass
class CrossValidation:
    matched: list = field(default_factory=list)  # (found, reference) pairs
    missing: list = field(default_factory=list)  # reference entries without a match
    extra: list = field(default_factory=list)  # found entries without a match

    def summary(self):
        return {"matched": len(self.matched), "missing": len(self.missing), "extra": len(self.extra)}


def cross_validate(found, reference, tol=DEDUPE_TOL):
    """Greedy one-to-one matching of two solution lists by ``(lam, mu)``."""
    key = lambda c: (float(np.real(c.lam)), float(np.real(c.mu)))  # noqa: E731
    found = sorted(found, key=key)
    reference = sorted(reference, key=key)
    used = set()
    report = CrossValidation()
    for ref in reference:
        hit = None
        for i, f in enumerate(found):
            if i not in used and same_solution(ref.lam, ref.mu, f.lam, f.mu, tol):
                hit = i
                break
        if hit is None:
            report.missing.append(ref)
        else:
            used.add(hit)
            report.matched.append((found[hit], ref))
    report.extra = [f for i, f in enumerate(found) if i not in used]
    return report
