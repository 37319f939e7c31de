import functools

import numpy as np
import pytest

from dustysph import preset
from dustysph.sim import run


@functools.lru_cache(maxsize=None)
def cached_run(name, n_snapshots=10, probes=()):
    """Preset runs shared by every test module in the session."""
    return run(preset(name), n_snapshots=n_snapshots, probes=probes)


@pytest.fixture(scope="session")
def runs():
    return cached_run


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
