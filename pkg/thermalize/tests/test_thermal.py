import math

import numpy as np
import pytest

from thermalize.hamiltonian import ChainConfig, build_hamiltonian, sample_disorder
from thermalize.initial import BlochAngles, preset_state, spin_coherent
from thermalize.observables import concurrence
from thermalize.qcore import DensityMatrix, expectation, partial_trace, pauli_string
from thermalize.spectra import diagonalize_chain
from thermalize.thermal import (
    EigenstateMarginals,
    boltzmann_weights,
    canonical_energy,
    effective_beta,
    energy_variance,
    solve_beta,
    thermal_concurrence_curve,
    thermal_reduced,
    thermal_state,
)
from thermalize.utils.errors import DomainError, ThermalRangeError, UnreachableTemperatureError


@pytest.fixture
def chain_spectrum(small_chain):
    g = sample_disorder(small_chain, 1)[0]
    return diagonalize_chain(small_chain, g), build_hamiltonian(small_chain, g)


def test_boltzmann_weights():
    eigenvalues = np.array([0.0, 1.0, 3.0])
    weights = boltzmann_weights(eigenvalues, 0.5)
    assert weights.sum() == pytest.approx(1.0)
    assert weights[1] / weights[0] == pytest.approx(math.exp(-0.5))
    np.testing.assert_allclose(boltzmann_weights(eigenvalues, 0.0), 1 / 3)
    np.testing.assert_allclose(boltzmann_weights(eigenvalues, 1e4), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(boltzmann_weights(eigenvalues, -1e4), [0.0, 0.0, 1.0])
    with pytest.raises(ThermalRangeError):
        boltzmann_weights(eigenvalues, float("nan"))


def test_canonical_energy_decreases_with_beta(chain_spectrum):
    spec, _ = chain_spectrum
    energies = [canonical_energy(spec.eigenvalues, beta) for beta in np.linspace(-20, 20, 41)]
    assert np.all(np.diff(energies) < 0)
    assert canonical_energy(spec.eigenvalues, 0.0) == pytest.approx(np.mean(spec.eigenvalues))


def test_energy_variance_is_minus_the_energy_slope(chain_spectrum):
    spec, _ = chain_spectrum
    beta, h = 3.0, 1e-5
    slope = (canonical_energy(spec.eigenvalues, beta + h) - canonical_energy(spec.eigenvalues, beta - h)) / (2 * h)
    assert energy_variance(spec.eigenvalues, beta) == pytest.approx(-slope, rel=1e-6)


def test_thermal_state_limits(chain_spectrum):
    spec, _ = chain_spectrum
    np.testing.assert_allclose(thermal_state(spec, 0.0).elements, np.eye(16) / 16, atol=1e-12)
    cold = thermal_state(spec, 1e5)
    ground = spec.ground_state().density_matrix()
    np.testing.assert_allclose(cold.elements, ground.elements, atol=1e-10)
    assert thermal_state(spec, 2.0).purity() < 1.0


@pytest.mark.parametrize("beta", [-7.5, -0.3, 0.7, 12.0])
def test_solve_beta_inverts_the_canonical_energy(chain_spectrum, beta):
    spec, _ = chain_spectrum
    target = canonical_energy(spec.eigenvalues, beta)
    solved = solve_beta(spec.eigenvalues, target, energy_tol=1e-12)
    assert solved.beta == pytest.approx(beta, rel=1e-6)
    assert solved.residual <= 1e-12


def test_dimensionless_beta_uses_the_coupling_scale(chain_spectrum):
    spec, _ = chain_spectrum
    target = canonical_energy(spec.eigenvalues, 2.0)
    solved = solve_beta(spec.eigenvalues, target, energy_tol=1e-12, coupling_scale=0.25)
    assert solved.beta_dimensionless == pytest.approx(0.5, rel=1e-6)


def test_all_excited_state_has_infinite_temperature(small_chain, chain_spectrum):
    spec, H = chain_spectrum
    psi = spin_coherent(preset_state("all_excited"), small_chain.n_sites)
    solved = effective_beta(psi, spec, H, coupling_scale=small_chain.mean_J_angular)
    assert solved.beta == 0.0
    assert solved.beta_dimensionless == 0.0


def test_equator_state_has_negative_temperature(small_chain, chain_spectrum):
    spec, H = chain_spectrum
    psi = spin_coherent(BlochAngles(theta0=math.pi / 2, phi0=math.pi / 4), small_chain.n_sites)
    solved = effective_beta(psi, spec, H)
    assert solved.beta < 0
    assert canonical_energy(spec.eigenvalues, solved.beta) == pytest.approx(solved.target_energy, abs=1e-9)


def test_edge_energies_are_unreachable(chain_spectrum):
    spec, H = chain_spectrum
    with pytest.raises(UnreachableTemperatureError):
        effective_beta(spec.ground_state(), spec, H)
    with pytest.raises(UnreachableTemperatureError):
        solve_beta(spec.eigenvalues, spec.e_max + 1.0, energy_tol=1e-12)


def test_eigenstate_marginals_match_partial_trace(chain_spectrum):
    spec, _ = chain_spectrum
    marginals = EigenstateMarginals(spec)
    for beta in (-1.5, 0.0, 4.0):
        rho = thermal_state(spec, beta)
        for j in (1, 2, 3):
            np.testing.assert_allclose(marginals.thermal_pair(beta, j), partial_trace(rho, [j, j + 1]).elements,
                                       atol=1e-12)
        for j in (1, 4):
            np.testing.assert_allclose(marginals.thermal_single(beta, j), partial_trace(rho, [j]).elements,
                                       atol=1e-12)
    with pytest.raises(DomainError):
        marginals.pair(4)
    with pytest.raises(DomainError):
        marginals.single(0)


def test_thermal_reduced_needs_an_adjacent_pair(chain_spectrum):
    spec, _ = chain_spectrum
    assert isinstance(thermal_reduced(spec, 1.0, (2, 3)), DensityMatrix)
    with pytest.raises(DomainError):
        thermal_reduced(spec, 1.0, (1, 3))
    with pytest.raises(DomainError):
        thermal_reduced(spec, 1.0, (4, 5))


def test_thermal_concurrence_curve(chain_spectrum):
    spec, _ = chain_spectrum
    betas = [-20.0, 0.0, 20.0]
    curve = thermal_concurrence_curve(spec, betas)
    assert curve[1] == 0.0
    for beta, value in zip(betas, curve):
        rho = thermal_state(spec, beta)
        expected = np.mean([concurrence(partial_trace(rho, [j, j + 1])).value for j in (1, 2, 3)])
        assert value == pytest.approx(expected, abs=1e-10)


@pytest.mark.slow
def test_effective_temperatures_of_the_twelve_site_chain():
    found = []
    for g_mean in (6.0, 6.7):
        cfg = ChainConfig(field_g_mean=g_mean, field_disorder_W=0.0)
        spec = diagonalize_chain(cfg)
        H = build_hamiltonian(cfg)
        quarter = spin_coherent(preset_state("equator_quarter_pi"), cfg.n_sites)
        found.append(effective_beta(quarter, spec, H, coupling_scale=cfg.mean_J_angular).beta_dimensionless)
        excited = spin_coherent(preset_state("all_excited"), cfg.n_sites)
        assert abs(effective_beta(excited, spec, H, coupling_scale=cfg.mean_J_angular).beta_dimensionless) < 1e-8
    assert min(abs(jbeta + 1.034) for jbeta in found) < 0.05


@pytest.mark.parametrize("beta", [-5.0, -0.4, 0.0, 0.9, 6.0])
def test_thermal_magnetization_vanishes_with_y_parity(chain_spectrum, beta):
    spec, _ = chain_spectrum
    rho = thermal_state(spec, beta)
    for site in range(1, 5):
        z = pauli_string(4, [(site, "z")])
        assert expectation(z, rho) == pytest.approx(0.0, abs=1e-10)


def test_thermal_state_eigenvalues_are_boltzmann_weights(chain_spectrum):
    spec, _ = chain_spectrum
    for beta in (-2.0, 0.5, 3.0):
        eigenvalues = np.linalg.eigvalsh(thermal_state(spec, beta).elements)
        expected = np.exp(-beta * spec.eigenvalues)
        np.testing.assert_allclose(np.sort(eigenvalues), np.sort(expected / expected.sum()), atol=1e-12)
