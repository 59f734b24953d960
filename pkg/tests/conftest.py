import numpy as np
import pytest

from degenfem import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the jit kernels once so timed tests measure the algorithms
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)


def random_triangle(rng, min_sin=1e-3):
    """Random non-degenerate triangle with all sines bounded below."""
    while True:
        pts = rng.uniform(-2.0, 2.0, size=(3, 2))
        a = pts[1] - pts[0]
        b = pts[2] - pts[0]
        cross = abs(a[0] * b[1] - a[1] * b[0])
        lens = [np.hypot(*(pts[i] - pts[j])) for i, j in ((0, 1), (1, 2), (2, 0))]
        if cross > min_sin * max(lens) ** 2:
            return pts


def random_thin_triangle(rng, log_lo=-3.5, log_hi=-1.52):
    """Thin triangle: apex over a base with height/base in [10^lo, 10^hi],
    randomly rotated and translated."""
    base = rng.uniform(0.1, 1.0)
    t = rng.uniform(0.25, 0.75)
    eta = base * 10 ** rng.uniform(log_lo, log_hi)
    pts = np.array([[t * base, eta], [0.0, 0.0], [base, 0.0]])
    ang = rng.uniform(0.0, 2 * np.pi)
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    return pts @ rot.T + rng.uniform(-1.0, 1.0, size=2)
