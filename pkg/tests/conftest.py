import numpy as np
import pytest

from landau_lab import SpectralGrid, band_limited_bump


@pytest.fixture(scope="session")
def grid_small():
    """Gaussian-friendly grid: L = 8, fine in v."""
    return SpectralGrid(32, 256, 8.0)


@pytest.fixture(scope="session")
def grid_bump():
    """Smallest grid hosting the r = 0.1 bump (needs L >= ~63)."""
    return SpectralGrid(32, 512, 64.0)


@pytest.fixture(scope="session")
def bump(grid_bump):
    return band_limited_bump(grid_bump, 0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
