"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line, collected in the terminal
summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest

from conftest import TABLE_SOLUTIONS, cnormal, phase_distance, record_criterion
from nepvlin.arnoldi import (
    ArnoldiOptions,
    RunConfig,
    filtering_arnoldi,
    pencil_singularity,
    projected_pencil,
    random_start_in_Z,
    run_solver,
    two_sided_ritz,
)
from nepvlin.generators import gen_example1, gen_example2, gen_example3
from nepvlin.linalg import null_space, solve_generalized_sylvester
from nepvlin.linearization import (
    Delta,
    W_basis,
    Z_basis,
    build_linearization,
    classify_eigvec,
    delta0_probe,
    delta_apply,
    explicit_deltas,
    low_rank_null_vector,
)
from nepvlin.problem import (
    definiteness_filter,
    eval_polynomials,
    polynomial_scale,
    solution_count_bound,
)
from nepvlin.reference import cross_validate, dense_reference_solve, scf_multistart

# genuine counts gathered by the other criteria, checked by the count-bound criterion
OBSERVED_COUNTS = []


def test_criterion_01_table_reproduction(four):
    t0 = time.perf_counter()
    res = run_solver(four, RunConfig(algorithm="filtering", shift=0.0, max_iter=6))
    elapsed = time.perf_counter() - t0
    sols = sorted(res.solutions, key=lambda s: s.lam)
    rows = sorted(TABLE_SOLUTIONS)
    ok = len(sols) == 4
    worst_val = worst_vec = 0.0
    if ok:
        for s, (lam, mu, v1, v2) in zip(sols, rows):
            worst_val = max(worst_val, abs(s.lam - lam), abs(s.mu - mu))
            worst_vec = max(worst_vec, phase_distance(s.v, np.array([v1, v2])))
    ok = ok and worst_val <= 5e-4 and worst_vec <= 5e-3 and elapsed < 1.0
    OBSERVED_COUNTS.append((2, 2, len(sols)))
    record_criterion(1, ok, f"{len(sols)} genuine, max |d(lam,mu)| {worst_val:.1e}, "
                            f"max vector phase distance {worst_vec:.1e}, {elapsed:.3f} s")


def test_criterion_02_false_root_rejected(false_root):
    f, g = eval_polynomials(false_root, 1.0, -2.0)
    scale = polynomial_scale(false_root, 1.0, -2.0)
    roots_ok = abs(f) <= 1e-10 * scale and abs(g) <= 1e-10 * scale
    rejected = not definiteness_filter(false_root, 1.0, -2.0)
    lin = build_linearization(false_root, seed=0)
    # the structured vector built from the null space of M(1, -2) must not classify as genuine
    labels = []
    for v in null_space(false_root.M(1.0, -2.0)).T:
        z = np.kron(v, np.concatenate([cnormal(np.random.default_rng(0), 1), v]))
        labels.append(classify_eigvec(lin, 1.0, z).is_genuine)
    ref = dense_reference_solve(lin)
    near_one = [c for c in ref.candidates if abs(c.lam - 1) < 1e-6]
    run = run_solver(false_root, RunConfig(max_iter=6))
    genuine_at_one = [c for c in list(ref.candidates) + run.candidates + run.solutions
                      if c.is_genuine and abs(c.lam - 1) < 1e-6]
    ok = roots_ok and rejected and not any(labels) and not genuine_at_one
    record_criterion(2, ok, f"|f| {abs(f):.1e}, |g| {abs(g):.1e} (scale {scale:.1e}), filter rejects: {rejected}, "
                            f"{len(near_one)} dense eigenpairs at lam=1, none genuine: {not genuine_at_one}")


@pytest.fixture(scope="module")
def gpe_problem():
    return gen_example2(L=2, n=256)


@pytest.mark.slow
def test_criterion_03_gpe(gpe_problem):
    rows = []
    for seed in range(5):
        row = {}
        for algorithm in ("two-sided", "filtering"):
            cfg = RunConfig(algorithm=algorithm, shift=50.0, max_iter=150, seed=seed,
                            r_spec="identity_plus_random_row", stop_after_genuine=1)
            t0 = time.perf_counter()
            res = run_solver(gpe_problem, cfg)
            elapsed = time.perf_counter() - t0
            lam = res.solutions[0].lam if res.solutions else np.nan
            it = res.first_genuine_iteration.get(lam, np.inf) if res.solutions else np.inf
            row[algorithm] = (lam, it, elapsed)
        rows.append(row)
    values_ok = all(abs(r[a][0] - 6.67) <= 0.05 for r in rows for a in r)
    within = all(r[a][1] <= 150 for r in rows for a in r)
    fast = all(r[a][2] < 60 for r in rows for a in r)
    fewer = sum(r["two-sided"][1] < r["filtering"][1] for r in rows)
    detail = "; ".join(f"seed {i}: {r['two-sided'][0]:.4f} at k={r['two-sided'][1]} vs k={r['filtering'][1]}"
                       for i, r in enumerate(rows))
    slowest = max(r[a][2] for r in rows for a in r)
    ok = values_ok and within and fast and fewer >= 4
    record_criterion(3, ok, f"two-sided faster on {fewer}/5, slowest run {slowest:.1f} s; {detail}")


def random_problem_seeds(count, base):
    return [base + i for i in range(count)]


def test_criterion_04_spectrum_inclusion():
    violations, total = 0, 0
    for seed in random_problem_seeds(20, 400):
        p = gen_example1(3, seed)
        dense = dense_reference_solve(build_linearization(p, seed=seed)).genuine()
        OBSERVED_COUNTS.append((3, 3, len(dense)))
        scf = scf_multistart(p, trials=4)
        total += len(scf)
        violations += len(cross_validate(dense, scf, tol=1e-7).missing)
    record_criterion(4, violations == 0 and total > 0,
                     f"{total} SCF solutions over 20 problems, {violations} not in the dense genuine set")


def test_criterion_05_spurious_accounting():
    n, ell = 3, 3
    details = []
    ok = True
    for seed in random_problem_seeds(10, 500):
        lin = build_linearization(gen_example1(n, seed), seed=seed)
        ref = dense_reference_solve(lin)
        right = int(np.sum(ref.v_block_ratios(n) <= 1e-8))
        kept = len(two_sided_ritz(lin, Z_basis(n)))
        excluded = len(ref) - kept
        details.append((right, excluded))
        ok &= len(ref) == 15 and right == ell and excluded == 2 * ell
    record_criterion(5, ok, "(right-rMEP, excluded) per problem: " + " ".join(f"{a}/{b}" for a, b in details))


def test_criterion_06_filtering_invariance():
    n = 20
    lin = build_linearization(gen_example1(n, 6), seed=6)
    state, _ = filtering_arnoldi(lin, 0.1, random_start_in_Z(n, 6), 50, record_ritz=False)
    worst = max(state.asymmetry)
    ok = state.iteration == 50 and len(state.asymmetry) == 50 and worst <= 1e-6
    record_criterion(6, ok, f"{len(state.asymmetry)} steps, max pre-projection V asymmetry {worst:.1e}, "
                            f"orthonormality {state.orthonormality_error():.1e}")


def test_criterion_07_W_annihilation():
    n = 4
    rng = np.random.default_rng(7)
    lin = build_linearization(gen_example1(n, 7), seed=7)
    Wb, Zb = W_basis(lin.R), Z_basis(n)
    scale = lin.scale()
    worst = 0.0
    for _ in range(100):
        z = Wb @ cnormal(rng, Wb.shape[1])
        z /= np.linalg.norm(z)
        Z = Zb @ np.linalg.qr(cnormal(rng, Zb.shape[1], 3))[0]
        lam = rng.uniform(-5, 5)
        r = Z.conj().T @ (delta_apply(lin, Delta.DELTA1, z) - lam * delta_apply(lin, Delta.DELTA0, z))
        worst = max(worst, np.linalg.norm(r))
    record_criterion(7, worst <= 1e-10 * scale, f"max ||Z^H (D1 - lam D0) z|| {worst:.1e} (scale {scale:.1e})")


def test_criterion_08_projected_pencil_singularity():
    n = 4
    lin = build_linearization(gen_example1(n, 8), seed=8)
    opts = ArnoldiOptions(extraction="two-sided")
    state, clog = filtering_arnoldi(lin, 0.2, random_start_in_Z(n, 8), 16, opts)
    H1, H0 = projected_pencil(lin, state.Z)
    rng = np.random.default_rng(8)
    ratios = [pencil_singularity(H1, H0, rho) for rho in rng.standard_normal(5)]
    decay = min(r for k, r in clog.singularity if k + 1 <= n * n)
    ok = state.nbasis == 17 and max(ratios) <= 1e-10 and decay <= 1e-12
    record_criterion(8, ok, f"k = {state.nbasis} basis vectors, max sigma_min/sigma_max {max(ratios):.1e}; "
                            f"decay within n^2 steps reaches {decay:.1e}")


def test_criterion_09_singular_path():
    p = gen_example3(5, 2, seed=0)
    res = run_solver(p, RunConfig(algorithm="standard", shift=0.0, max_iter=40, stop_after_genuine=1))
    scf = scf_multistart(p, trials=16)
    lam = res.solutions[0].lam if res.solutions else np.nan
    ref = min((s.lam for s in scf), key=abs)
    lin = res.linearization
    probe = delta0_probe(lin)
    z = low_rank_null_vector(lin)
    scale = lin.scale() * np.linalg.norm(z)
    r0 = np.linalg.norm(delta_apply(lin, Delta.DELTA0, z)) / scale
    r1 = np.linalg.norm(delta_apply(lin, Delta.DELTA1, z)) / scale
    it = res.first_genuine_iteration.get(lam, np.inf)
    ok = (abs(lam - ref) <= 1e-6 * (1 + abs(ref)) and it <= 40 and probe.verdict == "singular_low_rank_C"
          and r0 <= 1e-9 and r1 <= 1e-9)
    record_criterion(9, ok, f"lam {lam:.10f} vs SCF {ref:.10f} at k={it}; probe {probe}; "
                            f"null vector residuals {r0:.1e}, {r1:.1e}")


def test_criterion_10_count_bounds():
    rng_seeds = random_problem_seeds(6, 600)
    for n in (2, 3, 4):
        for r in range(0, n - 1):
            for seed in rng_seeds[:2]:
                p = gen_example3(n, r, seed=seed)
                OBSERVED_COUNTS.append((n, r, len(dense_reference_solve(build_linearization(p, seed=seed)).genuine())))
        for seed in rng_seeds:
            p = gen_example1(n, seed)
            OBSERVED_COUNTS.append((n, n, len(dense_reference_solve(build_linearization(p, seed=seed)).genuine())))
    bad = [(n, r, c) for n, r, c in OBSERVED_COUNTS if c > solution_count_bound(n, r)]
    attained = sum(c == solution_count_bound(n, r) for n, r, c in OBSERVED_COUNTS)
    record_criterion(10, not bad, f"{len(OBSERVED_COUNTS)} instances, {len(bad)} above the bound, "
                                  f"{attained} attain it")


def test_criterion_11_kernel_oracles():
    rng = np.random.default_rng(11)
    worst_syl = 0.0
    for _ in range(100):
        p, q = rng.integers(1, 7, size=2)
        A, C = cnormal(rng, p, p), cnormal(rng, p, p)
        B, D = cnormal(rng, q, q), cnormal(rng, q, q)
        E = cnormal(rng, p, q)
        X = solve_generalized_sylvester(A, B, C, D, E)
        K = np.kron(B, A) - np.kron(D, C)
        x = np.linalg.solve(K, E.reshape(-1, order="F"))
        worst_syl = max(worst_syl, np.linalg.norm(X.reshape(-1, order="F") - x) / np.linalg.norm(x))
    worst_delta = 0.0
    for n in (2, 3, 4):
        lin = build_linearization(gen_example1(n, n), seed=n)
        Zs = cnormal(rng, lin.size, 4)
        for which, D in zip(Delta, explicit_deltas(lin)):
            ref = D @ Zs
            worst_delta = max(worst_delta, np.linalg.norm(delta_apply(lin, which, Zs) - ref) / np.linalg.norm(ref))
    record_criterion(11, worst_syl <= 1e-10 and worst_delta <= 1e-12,
                     f"Sylvester vs Kronecker {worst_syl:.1e} over 100 instances; "
                     f"delta_apply vs explicit {worst_delta:.1e}")
