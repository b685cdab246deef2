import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nepvlin.generators import gen_false_root, gen_four_solutions

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# (lambda, mu, v1, v2) as printed in the worked 2 x 2 example, 4-5 digits
TABLE_SOLUTIONS = [
    (11.936, 4.0164, 0.0438 + 0.4424j, 0.7073 - 0.5497j),
    (-0.0684, 0.0207, 0.5209 - 0.0291j, -0.7875 + 0.3282j),
    (0.1906, -1.4229, 0.7836 + 0.3013j, 0.1508 + 0.5220j),
    (0.2612, -0.3510, 0.3963 - 0.7437j, 0.4312 - 0.3225j),
]


@pytest.fixture
def four():
    return gen_four_solutions()


@pytest.fixture
def false_root():
    return gen_false_root()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cnormal(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def hermitian(rng, n):
    X = cnormal(rng, n, n)
    return (X + X.conj().T) / 2


def hpd(rng, n):
    X = cnormal(rng, n, n)
    return X @ X.conj().T + n * np.eye(n)


def phase_distance(u, v):
    """min over unit phases c of ||c u - v|| for unit-norm u, v."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return float(np.sqrt(max(0.0, 2 - 2 * abs(np.vdot(u, v)))))


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    """Log one pass/fail line for the acceptance summary, then assert."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
