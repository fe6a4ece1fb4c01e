import numpy as np
import pytest

from rail.lowrank import LowRankState


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_orthonormal(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def random_state(rng, n, r, decay=1.0):
    sigma = decay ** np.arange(r) * (1.0 + rng.random(r))
    return LowRankState(random_orthonormal(rng, n, r), np.diag(sigma), random_orthonormal(rng, n, r))


def projector(v):
    return v @ v.T


def negative_definite(rng, n, shift=0.5):
    a = rng.standard_normal((n, n))
    return -(a @ a.T) / n - shift * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
