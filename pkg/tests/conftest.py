import numpy as np
import pytest

from glesim.kernels import KernelSpec
from glesim.spectral_density import GLEParams, SpectralDensity


@pytest.fixture
def exp1():
    return KernelSpec.exp_sum([(1.0, 1.0)])


@pytest.fixture
def sd_exp():
    """K = e^-t with m = 1, lambda = 0, beta = 1."""
    return SpectralDensity(KernelSpec.exp_sum([(1.0, 1.0)]), GLEParams(1.0, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
