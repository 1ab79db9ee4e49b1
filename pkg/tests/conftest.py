import numpy as np
import pytest


def orthonormal_design(n, m, seed):
    """Centred columns with X'X/n = I, built by QR against the ones vector."""
    rng = np.random.default_rng(seed)
    a = np.column_stack([np.ones(n), rng.standard_normal((n, m))])
    q, _ = np.linalg.qr(a)
    return q[:, 1:] * np.sqrt(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def linear_problem():
    from bgm.glm import standardize_columns

    rng = np.random.default_rng(7)
    n, p = 120, 40
    x = standardize_columns(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:5] = [1.5, -1.0, 0.8, 0.0, 0.6]
    y = x.values @ beta + rng.standard_normal(n)
    return x, y, beta


@pytest.fixture(scope="session")
def logistic_problem():
    from bgm.glm import standardize_columns

    rng = np.random.default_rng(11)
    n, p = 150, 30
    x = standardize_columns(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:4] = [1.2, -1.0, 0.8, 0.5]
    prob = 1.0 / (1.0 + np.exp(-(x.values @ beta)))
    y = (rng.random(n) < prob).astype(float)
    return x, y, beta


# PASS/FAIL lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
