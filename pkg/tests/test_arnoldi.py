import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TABLE_SOLUTIONS, hermitian, hpd
from nepvlin.arnoldi import (
    ArnoldiOptions,
    RunConfig,
    TrackMatcher,
    deflated_pencil_eig,
    filtering_arnoldi,
    hessenberg_ritz,
    random_start,
    random_start_in_Z,
    ritz_values,
    run_solver,
    standard_arnoldi_singular,
    two_sided_ritz,
)
from nepvlin.exceptions import ProjectedPencilSingular, SingularPencil
from nepvlin.generators import gen_example1, gen_example3
from nepvlin.linalg import hermitian_definite_eig
from nepvlin.linearization import Z_basis, build_linearization, in_Z, split
from nepvlin.problem import NepvProblem, nepv_residual
from nepvlin.reference import dense_reference_solve


def near_any(values, targets, tol):
    targets = np.asarray(targets)
    return all(np.min(np.abs(targets - v)) <= tol * (1 + abs(v)) for v in values)


class TestStarts:
    @given(n=st.integers(2, 6), seed=st.integers(0, 10**6))
    def test_start_in_Z(self, n, seed):
        z = random_start_in_Z(n, seed)
        _, V = split(z, n)
        assert np.array_equal(V, V.T)
        assert abs(np.linalg.norm(z) - 1) < 1e-14
        np.testing.assert_array_equal(z, random_start_in_Z(n, seed))

    def test_plain_start(self):
        z = random_start(3, 1)
        assert z.shape == (15,) and abs(np.linalg.norm(z) - 1) < 1e-14


class TestTrackMatcher:
    def test_stable_track_converges_after_window(self):
        m = TrackMatcher(tol_conv=1e-8, window=3)
        seq = [[1.0, 5.0], [1.1, 5.0], [1.1, 5.0], [1.1, 5.0], [1.1, 5.0]]
        ids = [m.update(k, lams) for k, lams in enumerate(seq, start=1)]
        assert all(list(i) == [0, 1] for i in ids)
        assert m.converged_at == {1: 4, 0: 5}

    def test_far_value_starts_new_track(self):
        m = TrackMatcher()
        m.update(1, [0.0, 1.0])
        ids = m.update(2, [0.0, 0.4, 1.0])
        assert list(ids) == [0, 2, 1]

    def test_each_track_used_once(self):
        m = TrackMatcher()
        m.update(1, [0.0])
        ids = m.update(2, [0.01, 10.0])
        assert list(ids) == [0, 1]


class TestRitz:
    def test_lambda_mapping(self):
        H = np.diag([2.0, 0.5, 1e-16])
        r = hessenberg_ritz(H, 0.0, 1.0)
        np.testing.assert_allclose(r.lam, [1.5, 3.0])
        assert len(r) == 2

    def test_requires_a_step(self, four):
        lin = build_linearization(four)
        state, _ = filtering_arnoldi(lin, 0.0, random_start_in_Z(2), 1, record_ritz=False)
        assert ritz_values(state).lam.shape == (1,)

    def test_deflated_pencil(self, rng):
        X = rng.standard_normal((4, 3))
        H0 = X @ np.diag([1.0, 2.0, -1.0]) @ X.T
        H1 = X @ np.diag([3.0, 4.0, 5.0]) @ X.T
        lams, Y, nullity = deflated_pencil_eig(H1, H0)
        assert nullity == 1
        np.testing.assert_allclose(np.sort(lams.real), [-5.0, 2.0, 3.0], atol=1e-10)

    def test_undeflated_singular_projection_raises(self):
        lin = build_linearization(gen_example1(3, 2), seed=2)
        with pytest.raises(ProjectedPencilSingular):
            two_sided_ritz(lin, Z_basis(3), deflate=False)


class TestFilteringInvariants:
    def test_basis_properties(self):
        lin = build_linearization(gen_example1(5, 3), seed=3)
        state, clog = filtering_arnoldi(lin, 0.2, random_start_in_Z(5, 3), 20)
        k = state.iteration
        assert state.orthonormality_error() <= 1e-10 * k
        assert np.all(np.tril(state.H[: k + 1, :k], -2) == 0)
        assert all(in_Z(state.Z[:, j], 5) for j in range(state.nbasis))
        assert max(state.asymmetry) <= 1e-6
        assert clog.records and all(r[0] <= k for r in clog.records)

    def test_full_space_ritz_values_are_pencil_eigenvalues(self):
        n = 3
        lin = build_linearization(gen_example1(n, 11), seed=11)
        state, _ = filtering_arnoldi(lin, 0.1, random_start_in_Z(n, 0), 20)
        assert state.breakdown and state.nbasis == n * n + n * (n - 1) // 2
        ref = dense_reference_solve(lin)
        assert near_any(state.last_ritz.lam, ref.lams, 1e-7)

    def test_table_values(self, four):
        lin = build_linearization(four)
        state, _ = filtering_arnoldi(lin, 0.0, random_start_in_Z(2), 6)
        lams = state.last_ritz.lam
        for row in TABLE_SOLUTIONS:
            assert np.min(np.abs(lams - row[0])) <= 5e-4

    def test_deterministic_log(self):
        lin = build_linearization(gen_example1(4, 2), seed=2)
        a = filtering_arnoldi(lin, 0.3, random_start_in_Z(4, 5), 15)[1]
        b = filtering_arnoldi(lin, 0.3, random_start_in_Z(4, 5), 15)[1]
        assert a.rows() == b.rows()

    def test_bad_k(self, four):
        with pytest.raises(ValueError):
            filtering_arnoldi(build_linearization(four), 0.0, random_start_in_Z(2), 0)


class TestTwoSided:
    def test_excludes_spurious(self):
        n = 3
        lin = build_linearization(gen_example1(n, 4), seed=4)
        ritz = two_sided_ritz(lin, Z_basis(n))
        assert len(ritz) == n * n
        ref = dense_reference_solve(lin)
        assert near_any(ritz.lam, ref.lams, 1e-7)

    def test_singularity_logged(self):
        lin = build_linearization(gen_example1(4, 1), seed=1)
        opts = ArnoldiOptions(extraction="two-sided")
        state, clog = filtering_arnoldi(lin, 0.0, random_start_in_Z(4, 1), 16, opts)
        ks, ratios = zip(*clog.singularity)
        assert ks[-1] == state.iteration and min(ratios) <= 1e-12

    def test_stop_policy(self):
        lin = build_linearization(gen_example1(4, 1), seed=1)
        opts = ArnoldiOptions(extraction="two-sided", singular_policy="stop")
        state, _ = filtering_arnoldi(lin, 0.0, random_start_in_Z(4, 1), 30, opts)
        assert state.iteration < 22


class TestRunSolver:
    def test_reduces_to_linear_when_P_equals_Q(self, rng):
        n = 4
        A, B, C, Q = hermitian(rng, n), hpd(rng, n), hermitian(rng, n), hpd(rng, n)
        p = NepvProblem(A, B, C, Q.copy(), Q)
        res = run_solver(p, RunConfig(max_iter=30))
        w, _ = hermitian_definite_eig(A - C, B)
        assert len(res.solutions) >= 1
        assert near_any([s.lam for s in res.solutions], w, 1e-8)
        assert all(abs(s.mu - 1) < 1e-10 for s in res.solutions)

    def test_zero_C_singular_path(self, rng):
        n = 4
        A, B, P, Q = hermitian(rng, n), hpd(rng, n), hermitian(rng, n), hpd(rng, n)
        p = NepvProblem(A, B, np.zeros((n, n)), P, Q)
        with pytest.raises(SingularPencil):
            run_solver(p, RunConfig(algorithm="filtering"))
        res = run_solver(p, RunConfig(algorithm="standard", max_iter=30))
        w, _ = hermitian_definite_eig(A, B)
        lams = [s.lam for s in res.solutions]
        assert len(lams) == n and near_any(lams, w, 1e-8)

    def test_singular_solves_are_consistent(self):
        lin = build_linearization(gen_example3(5, 2, seed=0), seed=0)
        state, _ = standard_arnoldi_singular(lin, 0.0, random_start(5, 0), 10, check_solve=True, record_ritz=False)
        assert max(state.solve_residuals) <= 1e-10
        assert set(state.solve_modes) == {"consistent-underdetermined"}

    def test_auto_picks_standard(self):
        res = run_solver(gen_example3(5, 2, seed=1), RunConfig(algorithm="auto", max_iter=40, stop_after_genuine=1))
        assert res.state.mode == "standard" and len(res.solutions) == 1

    def test_solutions_verified(self):
        p = gen_example1(4, 9)
        res = run_solver(p, RunConfig(max_iter=40))
        for s in res.solutions:
            assert nepv_residual(p, s.lam, s.v)[0] <= 1e-8
        lams = [s.lam for s in res.solutions]
        assert lams == sorted(lams, key=abs)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RunConfig(max_iter=0)
        with pytest.raises(ValueError):
            RunConfig(algorithm="lanczos")
        with pytest.raises(ValueError):
            RunConfig(tol_res=0)


@pytest.mark.slow
def test_first_converged_is_nearest_to_shift():
    """The earliest genuine track is the genuine eigenvalue closest to the shift."""
    hits, failures = 0, []
    trials = 50
    for seed in range(trials):
        p = gen_example1(10, 1000 + seed)
        res = run_solver(p, RunConfig(max_iter=145, seed=seed))
        if not res.first_genuine_iteration:
            failures.append((seed, "none"))
            continue
        first = min(res.first_genuine_iteration, key=lambda lam: (res.first_genuine_iteration[lam], abs(lam)))
        nearest = res.solutions[0].lam
        if abs(first - nearest) <= 1e-6 * (1 + abs(nearest)):
            hits += 1
        else:
            failures.append((seed, first, nearest))
    print(f"ordering: {hits}/{trials}; failures {failures}")
    assert hits >= 0.9 * trials
