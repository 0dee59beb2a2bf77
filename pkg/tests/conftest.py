import numpy as np
import pytest

from spheregraph.samplings import (
    equiangular_sampling,
    healpix_sampling,
    icosahedral_sampling,
    random_uniform_sampling,
)


@pytest.fixture(scope="session")
def healpix4_ring():
    return healpix_sampling(4, "ring")


@pytest.fixture(scope="session")
def healpix8_ring():
    return healpix_sampling(8, "ring")


@pytest.fixture(scope="session")
def healpix2_nested():
    return healpix_sampling(2, "nested")


@pytest.fixture(scope="session")
def equiangular8():
    return equiangular_sampling(8)


@pytest.fixture(scope="session")
def ico0():
    return icosahedral_sampling(0)


@pytest.fixture(scope="session")
def random200():
    return random_uniform_sampling(200, seed=1234)


def brute_force_neighbors(points: np.ndarray, i: int, k: int) -> set:
    """Exhaustive kNN oracle: all-pairs distances, ties broken by lower index."""
    d = np.linalg.norm(points - points[i], axis=1)
    order = sorted((dist, j) for j, dist in enumerate(d) if j != i)
    return {j for _, j in order[:k]}
