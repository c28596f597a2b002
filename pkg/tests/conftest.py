import numpy as np
import pytest

from loopcmc.loopalg import LoopMatrix, parity_mask

N = 24


def random_twisted(rng, lo, hi, scale=0.5, n=N):
    """Twisted coefficient stack with random entries on degrees lo..hi."""
    c = np.zeros((2 * n + 1, 2, 2))
    mask = parity_mask(n)
    for d in range(lo, hi + 1):
        c[n + d] = rng.uniform(-scale, scale, (2, 2)) * mask[n + d]
    return LoopMatrix(c)


def random_unipotent(rng, sign, factors=3, scale=0.5, n=N):
    """Product of elementary unipotent loops; lies in G- (sign=-1) or G+ (sign=+1).

    For sign=-1 the result is normalized (I at infinity).
    """
    g = LoopMatrix.identity(n)
    for _ in range(factors):
        k = sign * int(rng.choice([1, 3]))
        x = rng.uniform(-scale, scale)
        m = [[0, x], [0, 0]] if rng.random() < 0.5 else [[0, 0], [x, 0]]
        g = g @ LoopMatrix.from_terms({0: np.eye(2), k: m}, n)
    return g


def random_plus(rng, factors=3, scale=0.5, n=N):
    s = rng.uniform(0.6, 1.6)
    return random_unipotent(rng, 1, factors, scale, n) @ LoopMatrix.from_terms({0: np.diag([s, 1 / s])}, n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
