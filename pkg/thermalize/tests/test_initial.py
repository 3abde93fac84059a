import math

import numpy as np
import pytest
from pydantic import ValidationError

from thermalize.hamiltonian import ChainConfig, build_hamiltonian, hamiltonian_terms, sample_disorder
from thermalize.initial import BlochAngles, coherent_energy, preset_state, spin_coherent
from thermalize.qcore import expectation, pauli_string
from thermalize.utils.errors import DomainError


def test_phi_is_wrapped_into_one_turn():
    assert BlochAngles(theta0=1.0, phi0=-math.pi / 2).phi0 == pytest.approx(3 * math.pi / 2)
    assert BlochAngles(theta0=1.0, phi0=2 * math.pi).phi0 == 0.0
    assert BlochAngles(theta0=1.0, phi0=5 * math.pi).phi0 == pytest.approx(math.pi)


def test_theta_range_is_enforced():
    with pytest.raises(ValidationError):
        BlochAngles(theta0=-0.1)
    with pytest.raises(ValidationError):
        BlochAngles(theta0=4.0)


def test_all_excited_state_is_the_top_bit_string():
    psi = spin_coherent(BlochAngles(theta0=math.pi, phi0=0.0), 3)
    expected = np.zeros(8)
    expected[-1] = 1.0
    np.testing.assert_allclose(np.abs(psi.amplitudes), expected, atol=1e-15)


def test_bloch_vector_matches_expectations():
    angles = BlochAngles(theta0=1.1, phi0=2.3)
    psi = spin_coherent(angles, 2)
    measured = [expectation(pauli_string(2, [(2, axis)]), psi) for axis in "xyz"]
    np.testing.assert_allclose(measured, angles.bloch_vector(), atol=1e-12)


def test_product_state_has_equal_site_marginals():
    angles = BlochAngles(theta0=0.7, phi0=0.4)
    psi = spin_coherent(angles, 3)
    for site in (1, 2, 3):
        value = expectation(pauli_string(3, [(site, "z")]), psi)
        assert value == pytest.approx(math.cos(0.7), abs=1e-12)


@pytest.mark.parametrize("theta0, phi0", [(math.pi / 2, math.pi / 4), (0.3, 4.0), (math.pi, 0.0)])
def test_coherent_energy_matches_state_expectation(theta0, phi0):
    cfg = ChainConfig(n_sites=4, seed=3, potential_mu=[0.5, 0.0, -1.0, 2.0], field_phase=1.0)
    g = sample_disorder(cfg, 1)[0]
    angles = BlochAngles(theta0=theta0, phi0=phi0)
    expected = expectation(build_hamiltonian(cfg, g), spin_coherent(angles, 4))
    assert coherent_energy(hamiltonian_terms(cfg, g), angles) == pytest.approx(expected, abs=1e-12)


def test_coherent_energy_rejects_ladder_factors():
    with pytest.raises(DomainError):
        coherent_energy([(1.0, [(1, "+")])], BlochAngles(theta0=1.0))


def test_presets():
    assert preset_state("equator_quarter_pi").phi0 == pytest.approx(math.pi / 4)
    assert preset_state("all_excited").theta0 == pytest.approx(math.pi)
    with pytest.raises(DomainError):
        preset_state("sideways")
    with pytest.raises(DomainError):
        spin_coherent(BlochAngles(theta0=1.0), 0)
