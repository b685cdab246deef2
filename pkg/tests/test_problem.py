import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TABLE_SOLUTIONS, cnormal, hermitian, hpd
from nepvlin.exceptions import DimensionMismatch, EmptyNullSpace, NotHermitian, NotPositiveDefinite, ZeroVector
from nepvlin.generators import gen_example1
from nepvlin.problem import (
    CandidateSolution,
    Classification,
    NepvProblem,
    adjugate,
    dedupe,
    definiteness_filter,
    eval_polynomials,
    make_candidate,
    mu_of,
    nepv_residual,
    newton_refine,
    normalize_eigvec,
    polynomial_scale,
    solution_count_bound,
    validate,
)


def laplace_det(M):
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    return sum((-1) ** j * M[0, j] * laplace_det(np.delete(M[1:], j, axis=1)) for j in range(n))


def cofactor_adjugate(M):
    n = M.shape[0]
    adj = np.zeros_like(M, dtype=complex)
    for i, j in itertools.product(range(n), repeat=2):
        minor = np.delete(np.delete(M, i, axis=0), j, axis=1)
        adj[j, i] = (-1) ** (i + j) * laplace_det(minor)
    return adj


def random_problem(rng, n):
    return NepvProblem(hermitian(rng, n), hpd(rng, n), hermitian(rng, n), hermitian(rng, n), hpd(rng, n))


def table_vector(row):
    return np.array([row[2], row[3]])


class TestValidation:
    def test_worked_example_is_valid(self, four):
        validate(four)
        validate(four.matrices())

    def test_indefinite_B(self, four):
        A, B, C, P, Q = four.matrices()
        with pytest.raises(NotPositiveDefinite) as info:
            NepvProblem(A, np.diag([1.0, -1.0]), C, P, Q)
        assert info.value.which == "B"

    def test_non_hermitian_A(self, four):
        A, B, C, P, Q = four.matrices()
        bad = A.copy()
        bad[0, 1] += 1
        with pytest.raises(NotHermitian) as info:
            NepvProblem(bad, B, C, P, Q)
        assert info.value.which == "A"

    def test_dimension_mismatch(self, four):
        A, B, C, P, Q = four.matrices()
        with pytest.raises(DimensionMismatch):
            NepvProblem(A, B, C, P, np.eye(3))
        with pytest.raises(DimensionMismatch):
            validate([A, B])

    def test_matrices_read_only(self, four):
        with pytest.raises(ValueError):
            four.A[0, 0] = 1


class TestMu:
    def test_table_solution(self, four):
        assert abs(mu_of(four, table_vector(TABLE_SOLUTIONS[0])) - 4.0164) <= 5e-4

    def test_equal_forms(self, rng):
        p = random_problem(rng, 3)
        q = NepvProblem(p.A, p.B, p.C, p.Q, p.Q)
        for _ in range(5):
            assert abs(mu_of(q, cnormal(rng, 3)) - 1) <= 1e-14

    @given(seed=st.integers(0, 2**31 - 1), re=st.floats(-1e3, 1e3), im=st.floats(-1e3, 1e3))
    def test_scaling_invariance(self, seed, re, im):
        alpha = complex(re, im)
        if abs(alpha) < 1e-3:
            alpha = 1 + 1j
        rng = np.random.default_rng(seed)
        p = random_problem(rng, 3)
        v = cnormal(rng, 3)
        assert abs(mu_of(p, alpha * v) - mu_of(p, v)) <= 1e-14 * (1 + abs(mu_of(p, v)))

    def test_zero_vector(self, four):
        with pytest.raises(ZeroVector):
            mu_of(four, np.zeros(2))


class TestResidual:
    @pytest.mark.parametrize("index,bound", [(0, 5e-4), (1, 2e-3), (2, 5e-4), (3, 5e-4)])
    def test_table_rows(self, four, index, bound):
        # The second printed vector is within 6e-5 of the exact one, but mu(v)
        # is steep there and the 4-digit rounding alone gives a residual of 1.4e-3.
        row = TABLE_SOLUTIONS[index]
        res, _ = nepv_residual(four, row[0], table_vector(row))
        assert res <= bound

    def test_linear_reduction(self, rng):
        # P = Q makes mu = 1, so eigenpairs of (A - C, B) solve the NEPv
        p = random_problem(rng, 4)
        q = NepvProblem(p.A, p.B, p.C, p.Q, p.Q)
        w, V = np.linalg.eig(np.linalg.solve(q.B, q.A - q.C))
        for lam, v in zip(w, V.T):
            assert nepv_residual(q, lam, v)[0] <= 1e-12

    def test_external_mu_consistency(self, four):
        v = table_vector(TABLE_SOLUTIONS[0])
        _, r_ok = nepv_residual(four, 11.936, v, mu=mu_of(four, v))
        _, r_bad = nepv_residual(four, 11.936, v, mu=0.0)
        assert r_ok <= 1e-15 < r_bad


class TestPolynomials:
    # Explicit polynomials of the false-root example, as printed alongside it.
    @staticmethod
    def f_ref(lam, mu):
        return 51 * lam**2 - 4 * lam * mu - 52 * mu**2 - 110 * lam - 204 * mu - 149

    @staticmethod
    def g_ref(lam, mu):
        return 98 * lam * mu + 88 * mu**2 + 92 * lam + 222 * mu + 196

    def test_false_root_vanishes(self, false_root):
        f, g = eval_polynomials(false_root, 1.0, -2.0)
        scale = polynomial_scale(false_root, 1.0, -2.0)
        assert abs(f) <= 1e-10 * scale and abs(g) <= 1e-10 * scale

    @pytest.mark.parametrize("lam,mu", [(0.3, 0.7), (-2.0, 1.5), (4.0, -3.0), (1 + 1j, 0.5j)])
    def test_matches_printed_polynomials(self, false_root, lam, mu):
        f, g = eval_polynomials(false_root, lam, mu)
        assert abs(f - self.f_ref(lam, mu)) <= 1e-10 * (1 + abs(f))
        assert abs(g - self.g_ref(lam, mu)) <= 1e-10 * (1 + abs(g))

    def test_scalar_problem(self):
        p = NepvProblem([[3.0]], [[2.0]], [[5.0]], [[7.0]], [[11.0]])
        f, g = eval_polynomials(p, 0.5, 0.25)
        assert f == pytest.approx(3 - 0.5 * 2 - 0.25 * 5)
        assert g == pytest.approx(7 - 0.25 * 11)

    def test_cofactor_oracle(self, rng):
        p = random_problem(rng, 3)
        for _ in range(5):
            lam, mu = rng.standard_normal(2)
            M = p.M(lam, mu)
            f, g = eval_polynomials(p, lam, mu)
            assert abs(f - laplace_det(M)) <= 1e-11 * polynomial_scale(p, lam, mu)
            g_ref = np.trace(p.S(mu) @ cofactor_adjugate(M))
            assert abs(g - g_ref) <= 1e-11 * polynomial_scale(p, lam, mu)

    @pytest.mark.parametrize("rank", [0, 1, 2, 3, 4])
    def test_adjugate_at_any_rank(self, rng, rank):
        M = cnormal(rng, 4, rank) @ cnormal(rng, rank, 4)
        ref = cofactor_adjugate(M)
        assert np.linalg.norm(adjugate(M) - ref) <= 1e-11 * max(1.0, np.linalg.norm(M) ** 3)


class TestDefiniteness:
    def test_false_root_rejected(self, false_root):
        np.testing.assert_allclose(false_root.M(1, -2), 0, atol=1e-14)
        assert definiteness_filter(false_root, 1.0, -2.0) is False

    @pytest.mark.parametrize("row", TABLE_SOLUTIONS)
    def test_table_rows_accepted(self, four, row):
        # printed values carry 4-5 digits, so the rank tolerance is loosened
        assert definiteness_filter(four, row[0], row[1], tol_rank=1e-2)

    def test_simple_null_space_accepted(self, four):
        lam, v, _ = newton_refine(four, 0.1906, table_vector(TABLE_SOLUTIONS[2]))
        assert definiteness_filter(four, lam, mu_of(four, v))

    def test_regular_point(self, four):
        with pytest.raises(EmptyNullSpace):
            definiteness_filter(four, 100.0, 3.0)


class TestBound:
    def test_values(self):
        assert solution_count_bound(2, 2) == 4
        assert solution_count_bound(5, 2) == 19
        for n in range(1, 8):
            assert solution_count_bound(n, n) == n * n
        with pytest.raises(ValueError):
            solution_count_bound(3, 4)


class TestCandidates:
    def test_normalization(self, four):
        v = normalize_eigvec(four, table_vector(TABLE_SOLUTIONS[1]) * (2 - 3j))
        assert np.vdot(v, four.B @ v).real == pytest.approx(1.0)
        k = np.argmax(np.abs(v))
        assert v[k].imag == 0 and v[k].real > 0

    def test_newton_refine_from_table(self, four):
        for row in TABLE_SOLUTIONS:
            lam, v, steps = newton_refine(four, row[0], table_vector(row))
            assert nepv_residual(four, lam, v)[0] <= 1e-12
            assert abs(lam - row[0]) <= 5e-4 * (1 + abs(row[0]))
            assert steps <= 6

    def test_classification_rules(self, four):
        row = TABLE_SOLUTIONS[2]
        assert make_candidate(four, row[0], table_vector(row)).classification is Classification.UNVERIFIED
        assert make_candidate(four, 1 + 2j, table_vector(row)).classification is Classification.SPURIOUS_COMPLEX
        lam, v, _ = newton_refine(four, row[0], table_vector(row))
        assert make_candidate(four, lam, v).is_genuine

    def test_dict_round_trip_and_dedupe(self, four):
        lam, v, _ = newton_refine(four, 11.936, table_vector(TABLE_SOLUTIONS[0]))
        c = make_candidate(four, lam, v)
        d = CandidateSolution.from_dict(c.to_dict())
        assert d.lam == c.lam and d.mu == c.mu and np.array_equal(d.v, c.v)
        assert d.classification is c.classification
        assert len(dedupe([c, d, make_candidate(four, lam * (1 + 1e-9), v)])) == 1

    def test_generator_problem_valid(self):
        validate(gen_example1(5, 3))
