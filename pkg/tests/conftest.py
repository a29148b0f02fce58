import numpy as np
import pytest

from muflow.grid import PeriodicGrid, sample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid: PeriodicGrid, rng: np.random.Generator, modes: int = 8, mean: float = 0.0):
    k = np.arange(1, modes + 1)
    a, b = rng.normal(size=(2, modes)) / k
    x = grid.points[:, None]
    return sample(grid, lambda _: mean + (a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)).sum(axis=1))
