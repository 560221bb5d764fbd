"""Shared fixtures. Scene fixtures are session scoped because dataset
synthesis dominates test runtime; tests must not mutate them."""

import numpy as np
import pytest

from chartloc import presets, scenesim


@pytest.fixture(scope="session")
def los_small():
    """Noise-free free-space hall, 40 records. Single exact path per link."""
    return scenesim.generate_dataset(presets.los_hall(count=40))


@pytest.fixture(scope="session")
def convex_small():
    """Convex room with floor reflection and noise, 60 records."""
    return scenesim.generate_dataset(presets.convex_hall(count=60))


@pytest.fixture
def rng():
    # fresh stream per test so outcomes never depend on execution order
    return np.random.default_rng(12345)
