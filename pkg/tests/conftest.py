import numpy as np
import pytest

from equiroute.model import Instance


def flat_instance(demands, Q, C, psi=100.0, epsilon=300.0, lam=0.5, m=3):
    """Instance with unit travel times between distinct nodes."""
    n = len(demands)
    travel = tuple(
        tuple(0.0 if i == j else 1.0 for j in range(n + 1)) for i in range(n + 1)
    )
    return Instance(
        demands=tuple(float(d) for d in demands),
        travel=travel,
        m=m,
        Q=float(Q),
        C=float(C),
        psi=float(psi),
        epsilon=float(epsilon),
        lam=lam,
    )


def euclid_instance(rng, n, m=3, Q=None, C=None, psi=None, epsilon=None, lam=0.5, box=50.0):
    """Random planar instance with ceiled Euclidean travel times."""
    coords = rng.uniform(0.0, box, size=(n + 1, 2))
    demands = rng.integers(5, 40, size=n).astype(float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.ceil(np.hypot(diff[..., 0], diff[..., 1]))
    np.fill_diagonal(dist, 0.0)
    total = demands.sum()
    if C is None:
        C = 0.7 * total
    if Q is None:
        Q = 1.5 * C / m
    if psi is None:
        psi = float(dist[0, 1:].max() * 4 + 10)
    if epsilon is None:
        epsilon = psi * m
    return Instance(
        demands=tuple(demands),
        travel=tuple(tuple(row) for row in dist),
        m=m,
        Q=float(Q),
        C=float(C),
        psi=float(psi),
        epsilon=float(epsilon),
        lam=lam,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
