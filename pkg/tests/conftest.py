import pytest

from gravpurity import McConfig, ModelParams
from gravpurity.closedform import sigma_b_of_mass


@pytest.fixture
def reference_params() -> ModelParams:
    """The standard region-II probe point: m = M_C/2, l_c = 1, sigma = 30 sigma_B."""
    mass = 0.5
    return ModelParams(l_c=1.0, mass=mass, sigma=30.0 * sigma_b_of_mass(mass))


@pytest.fixture
def fast_mc() -> McConfig:
    """Small fixed-sample config for cheap statistical checks."""
    return McConfig(seed=20250810, n_samples=2**16)


@pytest.fixture
def target_mc() -> McConfig:
    """Adaptive config with a quick target."""
    return McConfig(seed=20250810, target_se=2e-3)
