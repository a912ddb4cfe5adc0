import math

import numpy as np
import pytest

from halfspace_boussinesq.harness.initial_data import InitialDataSpec, generate_initial_data
from halfspace_boussinesq.spectral_core import build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(2 * math.pi, 8, math.pi, 8)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(2 * math.pi, 16, math.pi, 16)


@pytest.fixture(scope="session")
def smooth_state(grid16):
    """Small divergence-free random state on the 16^3 grid."""
    spec = InitialDataSpec(a=1.0, k0=2.0, amplitude=1e-2, rng_seed=5)
    return generate_initial_data(spec, grid16)
