"""Test-problem generators: dense random, 1-D Gross-Pitaevskii-type, low-rank C."""

import numpy as np

from .linearization import complex_normal
from .problem import NepvProblem


def _hermitian_gaussian(rng, n):
    X = complex_normal(rng, (n, n))
    return (X + X.conj().T) / 2


def _hpd_sqrt(rng, n):
    """Hermitian positive definite square root of ``G G^H`` for Gaussian ``G``."""
    G = complex_normal(rng, (n, n))
    w, U = np.linalg.eigh(G @ G.conj().T)
    X = (U * np.sqrt(np.clip(w, 0, None))) @ U.conj().T
    return (X + X.conj().T) / 2


def gen_example1(n, seed=0):
    """Dense random problem with Gaussian Hermitian ``A, C, P`` and HPD ``B, Q``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(seed)
    A = _hermitian_gaussian(rng, n)
    B = _hpd_sqrt(rng, n)
    C = _hermitian_gaussian(rng, n)
    P = _hermitian_gaussian(rng, n)
    Q = _hpd_sqrt(rng, n)
    return NepvProblem(A, B, C, P, Q, meta={"generator": "example1", "n": n, "seed": seed})


def gpe_c(x):
    return 1 - np.exp(-((10 * x - 1) ** 2) / 10)


def gpe_p(x, L):
    return 5 * np.cos(np.pi * x / L)


def gen_example2(L=2.0, n=256):
    """Central-difference discretization on ``[-L/2, L/2]`` with Dirichlet ends.

    ``A`` is the second-difference matrix, ``B = Q = I``, ``C = -diag(c(x_i))``
    and ``P`` is the pentadiagonal gradient-energy matrix weighted by
    ``p(x) = 5 cos(pi x / L)``. The boundary nodes ``x_0`` and ``x_{n+1}``
    enter ``P`` through ``p`` evaluated there.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    if not L > 0:
        raise ValueError("L must be positive")
    h = L / (n + 1)
    x = -L / 2 + h * np.arange(n + 2)  # x_0 .. x_{n+1}
    inner = x[1:-1]
    A = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h**2
    C = -np.diag(gpe_c(inner))
    p = gpe_p(x, L)
    i = np.arange(1, n + 1)
    P = np.diag((p[i - 1] + p[i + 1]) / (4 * h**2))
    off = -p[np.arange(2, n)] / (4 * h**2)  # P[i, i+2] with 1-based i = 1..n-2 uses p(x_{i+1})
    P += np.diag(off, 2) + np.diag(off, -2)
    eye = np.eye(n)
    return NepvProblem(A, eye, C, P, eye.copy(), meta={"generator": "example2", "L": L, "n": n})


def gen_example3(n, r, seed=0):
    """Random problem as :func:`gen_example1` but with ``C`` of rank ``r``."""
    if not 0 <= r < n - 1:
        raise ValueError("need 0 <= r < n - 1")
    rng = np.random.default_rng(seed)
    A = _hermitian_gaussian(rng, n)
    B = _hpd_sqrt(rng, n)
    G, _ = np.linalg.qr(complex_normal(rng, (n, r)))
    d = rng.standard_normal(r)
    C = (G * d) @ G.conj().T
    P = _hermitian_gaussian(rng, n)
    Q = _hpd_sqrt(rng, n)
    return NepvProblem(A, B, C, P, Q, meta={"generator": "example3", "n": n, "r": r, "seed": seed})


def gen_four_solutions():
    """A 2 x 2 problem attaining the bound of four eigenvalues."""
    A = np.array([[4, 3 + 1j], [3 - 1j, 1]])
    B = np.array([[16, 2 - 2j], [2 + 2j, 9]])
    C = np.array([[-8, 5 - 10j], [5 + 10j, -17]])
    P = np.array([[6, -1 + 18j], [-1 - 18j, 4]])
    Q = np.array([[6, 2 + 1j], [2 - 1j, 4]])
    return NepvProblem(A, B, C, P, Q, meta={"generator": "four_solutions", "n": 2})


def gen_false_root():
    """A 2 x 2 problem where ``(lam, mu) = (1, -2)`` solves the polynomial pair but is no eigenvalue."""
    A = np.array([[8, -9 - 6j], [-9 + 6j, -4]])
    B = np.array([[8, 3 + 2j], [3 - 2j, 8]])
    C = np.array([[0, 6 + 4j], [6 - 4j, 6]])
    P = np.array([[-4, 6 + 6j], [6 - 6j, 0]])
    Q = np.array([[6, -3 - 2j], [-3 + 2j, 3]])
    return NepvProblem(A, B, C, P, Q, meta={"generator": "false_root", "n": 2})


GENERATORS = {
    "example1": gen_example1,
    "example2": gen_example2,
    "example3": gen_example3,
    "four_solutions": gen_four_solutions,
    "false_root": gen_false_root,
}
