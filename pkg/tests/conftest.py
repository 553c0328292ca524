import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def disk_grid_minimizer(objective, resolution=1e-3, coarse=1e-2):
    """Brute-force minimizer of ``objective(points_on_L2)`` over the Poincare disk.

    A coarse pass over the whole disk is followed by local passes at
    ``resolution`` and ``resolution / 10``; ``objective`` maps a (k, 3) array
    of hyperboloid points to k values. Returns the minimizing hyperboloid point.
    """
    def to_hyperboloid(p):
        r2 = np.sum(p * p, axis=-1, keepdims=True)
        return np.concatenate([1 + r2, 2 * p], axis=-1) / (1 - r2)

    g = np.arange(-1 + coarse, 1, coarse)
    P = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    P = P[np.sum(P * P, 1) < 0.995]
    best = P[np.argmin(objective(to_hyperboloid(P)))]
    for step, half in ((resolution, 2 * coarse), (resolution / 10, 2 * resolution)):
        loc = np.arange(-half, half + step / 2, step)
        Q = best + np.stack(np.meshgrid(loc, loc), -1).reshape(-1, 2)
        Q = Q[np.sum(Q * Q, 1) < 1]
        best = Q[np.argmin(objective(to_hyperboloid(Q)))]
    return to_hyperboloid(best)
