import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from latticetomo.constants import ATOMIC_MASS_UNIT
from latticetomo.fock import DensityMatrix, OscillatorSpec

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

RB85_APPROX_MASS = 85.0 * ATOMIC_MASS_UNIT


def random_density_matrix(rng: np.random.Generator, dim: int) -> DensityMatrix:
    """Random full-rank state from a Ginibre draw."""
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = raw @ raw.conj().T
    rho /= rho.trace().real
    return DensityMatrix(rho)


@pytest.fixture
def deep_spec() -> OscillatorSpec:
    """Measured well frequency of the four-bound-state lattice."""
    return OscillatorSpec(mass=RB85_APPROX_MASS, omega=48.33e3)


@pytest.fixture
def shallow_spec() -> OscillatorSpec:
    """Measured well frequency of the two-bound-state lattice."""
    return OscillatorSpec(mass=RB85_APPROX_MASS, omega=32.2e3)
