"""
Shared fixtures: seeded generators, small chains and random states
"""
import numpy as np
import pytest

from thermalize.hamiltonian import ChainConfig
from thermalize.qcore import DensityMatrix, StateVector


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_chain():
    """Four disordered sites, default couplings and drive"""
    return ChainConfig(n_sites=4, seed=7)


@pytest.fixture
def clean_chain():
    """Six sites without disorder"""
    return ChainConfig(n_sites=6, field_disorder_W=0.0)


@pytest.fixture
def random_state(rng):
    def make(n_sites: int) -> StateVector:
        amplitudes = rng.normal(size=2 ** n_sites) + 1j * rng.normal(size=2 ** n_sites)
        return StateVector.normalized(n_sites, amplitudes)
    return make


@pytest.fixture
def random_density(rng):
    def make(n_sites: int) -> DensityMatrix:
        dim = 2 ** n_sites
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = a @ a.conj().T
        return DensityMatrix(n_sites, rho / np.trace(rho).real)
    return make
