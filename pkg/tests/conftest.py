import itertools
import math
import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_sym(p, rng):
    A = rng.standard_normal((p, p))
    return (A + A.T) / 2


def random_psd(p, rng, rank=None):
    B = rng.standard_normal((p, rank or p))
    return B @ B.T / p


def band(p, lag):
    idx = np.arange(p)
    return (np.abs(idx[:, None] - idx[None, :]) == lag).astype(float)


def brute_eta4(X):
    """Ordered quadruple sum over distinct indices, straight from the definition (X is p x n)."""
    p, n = X.shape
    d = np.array([[np.sum((X[:, j] - X[:, k]) ** 2) for k in range(n)] for j in range(n)])
    total = 0.0
    for j1, j2, j3, j4 in itertools.permutations(range(n), 4):
        total += (d[j1, j2] - d[j3, j4]) ** 2
    return total * math.factorial(n - 4) / (4 * p * math.factorial(n))


def brute_minor_sum(G, k):
    q = G.shape[0]
    return math.fsum(np.linalg.det(G[np.ix_(c, c)]) for c in itertools.combinations(range(q), k))


def span_family(p, d, count, rng):
    """``count`` random nonnegative combinations of ``d`` independent PSD generators (each used)."""
    gens = [random_psd(p, rng) for _ in range(d)]
    W = rng.uniform(0.1, 1.0, size=(count, d))
    return np.einsum("cd,dij->cij", W, np.stack(gens)), gens


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL/SKIPPED line per acceptance criterion; unrecorded errors count as FAIL."""
    lines = []

    def record(number, status, detail=""):
        line = f"CRITERION {number:>2}: {status}  {detail}".rstrip()
        lines.append(line)
        _ACCEPTANCE.append(line)
        print(line)

    yield record
    if not lines:
        number = request.node.get_closest_marker("criterion").args[0]
        _ACCEPTANCE.append(f"CRITERION {number:>2}: FAIL  (error before a verdict)")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
