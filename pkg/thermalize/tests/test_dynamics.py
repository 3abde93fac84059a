import math

import numpy as np
import pytest
from pydantic import ValidationError

from thermalize.dynamics import (
    DecoherenceParams,
    TimeGrid,
    evolve_lindblad_dense,
    evolve_lindblad_trajectories,
    evolve_unitary,
    expectation_reducer,
    lindblad_operators,
    propagate,
    sigma_z_reducer,
)
from thermalize.hamiltonian import ChainConfig, build_hamiltonian
from thermalize.initial import BlochAngles, spin_coherent
from thermalize.observables import mean_sigma_z
from thermalize.qcore import DensityMatrix, HermitianOperator, StateVector, expectation, pauli_string
from thermalize.spectra import diagonalize, diagonalize_chain
from thermalize.utils.errors import DomainError


def rk4_oracle(h: np.ndarray, psi: np.ndarray, t_end: float, dt: float) -> np.ndarray:
    """Fixed-step Runge-Kutta integration of d psi / dt = -i h psi"""
    steps = int(round(t_end / dt))
    rhs = lambda y: -1j * (h @ y)
    for _ in range(steps):
        k1 = rhs(psi)
        k2 = rhs(psi + 0.5 * dt * k1)
        k3 = rhs(psi + 0.5 * dt * k2)
        k4 = rhs(psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


@pytest.fixture
def qubit_zero_hamiltonian():
    return HermitianOperator(1, np.zeros((2, 2)))


def test_time_grid_rules():
    grid = TimeGrid(np.array([0.0, 1.0, 1.0, 2.0]))
    np.testing.assert_array_equal(grid.times, [0.0, 1.0, 2.0])
    assert grid.t_max == 2.0
    assert len(TimeGrid.uniform(600.0, 121)) == 121
    with pytest.raises(DomainError):
        TimeGrid(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(DomainError):
        TimeGrid(np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        TimeGrid(np.array([]))
    with pytest.raises(DomainError):
        TimeGrid.uniform(10.0, 1)


def test_spectral_propagation_matches_runge_kutta(small_chain, random_state):
    H = build_hamiltonian(small_chain)
    spec = diagonalize(H)
    psi = random_state(4)
    times = [10.0, 25.0, 50.0]
    for t, propagated in zip(times, propagate(spec, psi.amplitudes, times)):
        expected = rk4_oracle(H.dense(), psi.amplitudes, t, 0.025)
        np.testing.assert_allclose(propagated, expected, atol=1e-8)


def test_unitary_evolution_conserves_norm_and_energy(small_chain):
    H = build_hamiltonian(small_chain)
    spec = diagonalize_chain(small_chain)
    psi0 = spin_coherent(BlochAngles(theta0=1.2, phi0=0.3), 4)
    states = evolve_unitary(spec, psi0, TimeGrid.uniform(300.0, 31))
    assert states[0] is psi0
    energy = expectation(H, psi0)
    for state in states:
        assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)
        assert expectation(H, state) == pytest.approx(energy, abs=1e-12)
    with pytest.raises(DomainError):
        evolve_unitary(spec, spin_coherent(BlochAngles(theta0=1.0), 3), TimeGrid.uniform(1.0, 2))


def test_batch_propagation_matches_single_states(small_chain, random_state):
    spec = diagonalize_chain(small_chain)
    states = [random_state(4) for _ in range(3)]
    batch = np.stack([s.amplitudes for s in states], axis=1)
    times = [0.0, 40.0, 90.0]
    for k, evolved in enumerate(propagate(spec, batch, times)):
        for column, state in enumerate(states):
            single = list(propagate(spec, state.amplitudes, times))[k]
            np.testing.assert_allclose(evolved[:, column], single, atol=1e-12)


def test_lindblad_operator_count():
    assert len(lindblad_operators(3, DecoherenceParams())) == 6
    assert len(lindblad_operators(3, DecoherenceParams(T1=None))) == 3
    assert len(lindblad_operators(3, DecoherenceParams(T1=None, T2=None))) == 0
    assert len(lindblad_operators(2, DecoherenceParams(T1=[10.0, math.inf], T2=None))) == 1


def test_decoherence_parameters():
    with pytest.raises(ValidationError):
        DecoherenceParams(T1=-1.0)
    with pytest.raises(ValidationError):
        DecoherenceParams(T2=[1.0, 0.0])
    with pytest.raises(DomainError):
        DecoherenceParams(T1=[1.0, 2.0]).per_site(3)
    assert DecoherenceParams().warnings(4) == []
    assert DecoherenceParams(T1=10.0, T2=30.0).warnings(2)
    t1, t2 = DecoherenceParams.device().per_site(12)
    assert t1.shape == t2.shape == (12,)
    assert t1[0] == pytest.approx(20600.0)


def test_amplitude_damping_of_one_qubit(qubit_zero_hamiltonian):
    grid = TimeGrid.uniform(100.0, 11)
    excited = DensityMatrix(1, np.diag([0.0, 1.0]))
    states = evolve_lindblad_dense(qubit_zero_hamiltonian, excited, grid, DecoherenceParams(T1=50.0, T2=None))
    populations = [rho.elements[1, 1].real for rho in states]
    np.testing.assert_allclose(populations, np.exp(-grid.times / 50.0), atol=1e-7)


def test_dephasing_of_one_qubit(qubit_zero_hamiltonian):
    grid = TimeGrid.uniform(100.0, 11)
    plus = StateVector.normalized(1, np.array([1.0, 1.0])).density_matrix()
    states = evolve_lindblad_dense(qubit_zero_hamiltonian, plus, grid, DecoherenceParams(T1=None, T2=40.0))
    coherences = [abs(rho.elements[0, 1]) for rho in states]
    np.testing.assert_allclose(coherences, 0.5 * np.exp(-grid.times / 40.0), atol=1e-7)
    for rho in states:
        assert np.trace(rho.elements).real == pytest.approx(1.0, abs=1e-10)


def test_dense_lindblad_without_decoherence_is_unitary(small_chain):
    H = build_hamiltonian(small_chain)
    spec = diagonalize(H)
    psi0 = spin_coherent(BlochAngles(theta0=math.pi, phi0=0.0), 4)
    grid = TimeGrid.uniform(60.0, 7)
    dense = evolve_lindblad_dense(H, psi0.density_matrix(), grid, DecoherenceParams(T1=None, T2=None))
    for rho, psi in zip(dense, evolve_unitary(spec, psi0, grid)):
        np.testing.assert_allclose(rho.elements, psi.density_matrix().elements, atol=1e-6)


def test_dense_lindblad_size_limit():
    H = pauli_string(9, [(1, "z")])
    with pytest.raises(DomainError):
        evolve_lindblad_dense(H, DensityMatrix.maximally_mixed(9), TimeGrid.uniform(1.0, 2), DecoherenceParams())


def _two_site_problem():
    cfg = ChainConfig(n_sites=2, field_disorder_W=0.0)
    H = build_hamiltonian(cfg)
    psi0 = spin_coherent(BlochAngles(theta0=math.pi / 2, phi0=math.pi / 4), 2)
    dec = DecoherenceParams(T1=30.0, T2=20.0)
    return H, psi0, dec, TimeGrid.uniform(40.0, 9)


def test_trajectories_reproduce_the_dense_master_equation():
    H, psi0, dec, grid = _two_site_problem()
    dense = evolve_lindblad_dense(H, psi0.density_matrix(), grid, dec)
    expected = np.array([mean_sigma_z(rho) for rho in dense])
    ensemble = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=400, seed=5,
                                            reducers={"sigma_z": sigma_z_reducer(2)})
    mean, err = ensemble.mean("sigma_z"), ensemble.stderr("sigma_z")
    assert np.all(np.abs(mean - expected) <= 4 * err + 1e-3)
    assert ensemble.jump_counts.sum() > 0


def test_trajectory_density_and_marginals_average_to_the_dense_state():
    H, psi0, dec, grid = _two_site_problem()
    dense = evolve_lindblad_dense(H, psi0.density_matrix(), grid, dec)
    ensemble = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=300, seed=9,
                                            keep_marginals=True, keep_density=True)
    averaged = ensemble.density_matrices()
    np.testing.assert_allclose(averaged[0].elements, dense[0].elements, atol=1e-10)
    assert np.max(np.abs(averaged[-1].elements - dense[-1].elements)) < 0.15
    marginals = ensemble.marginals()
    np.testing.assert_allclose(marginals[-1].pairs[0], averaged[-1].elements, atol=1e-10)
    values, errors = ensemble.marginal_statistic(lambda m: m.mean_entropy())
    assert values.shape == errors.shape == (len(grid),)
    assert errors[0] == pytest.approx(0.0, abs=1e-12)


def test_trajectories_are_reproducible_across_thread_counts():
    H, psi0, dec, grid = _two_site_problem()
    reducers = {"sigma_z": sigma_z_reducer(2)}
    one = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=20, seed=3, reducers=reducers, max_workers=1)
    three = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=20, seed=3, reducers=reducers, max_workers=3)
    np.testing.assert_array_equal(one.values["sigma_z"], three.values["sigma_z"])
    np.testing.assert_array_equal(one.jump_counts, three.jump_counts)
    other = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=20, seed=4, reducers=reducers)
    assert not np.array_equal(one.values["sigma_z"], other.values["sigma_z"])


def test_trajectories_without_decoherence_follow_the_unitary_path(small_chain):
    H = build_hamiltonian(small_chain)
    spec = diagonalize(H)
    psi0 = spin_coherent(BlochAngles(theta0=1.0, phi0=2.0), 4)
    grid = TimeGrid.uniform(80.0, 9)
    z1 = pauli_string(4, [(1, "z")])
    ensemble = evolve_lindblad_trajectories(spec, psi0, grid, DecoherenceParams(T1=None, T2=None), n_traj=2,
                                            reducers={"z1": expectation_reducer(z1)})
    expected = [expectation(z1, psi) for psi in evolve_unitary(spec, psi0, grid)]
    np.testing.assert_allclose(ensemble.mean("z1"), expected, atol=1e-6)
    assert ensemble.jump_counts.sum() == 0
    trajectory = ensemble.as_trajectory()
    assert set(trajectory.keys()) == {"z1", "z1_stderr"}


def test_trajectory_arguments_are_checked():
    H, psi0, dec, grid = _two_site_problem()
    with pytest.raises(DomainError):
        evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=0)
    with pytest.raises(DomainError):
        evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=3).density_matrices()


@pytest.mark.slow
def test_trajectories_match_dense_on_four_sites(small_chain):
    H = build_hamiltonian(small_chain)
    psi0 = spin_coherent(BlochAngles(theta0=math.pi / 2, phi0=math.pi / 4), 4)
    dec = DecoherenceParams(T1=200.0, T2=60.0)
    grid = TimeGrid.uniform(150.0, 4)
    dense = evolve_lindblad_dense(H, psi0.density_matrix(), grid, dec)
    expected = np.array([mean_sigma_z(rho) for rho in dense])
    ensemble = evolve_lindblad_trajectories(H, psi0, grid, dec, n_traj=2000, seed=17,
                                            reducers={"sigma_z": sigma_z_reducer(4)}, max_workers=4)
    assert np.all(np.abs(ensemble.mean("sigma_z") - expected) <= 3 * ensemble.stderr("sigma_z") + 1e-9)


def test_unitary_evolution_composes_in_time(small_chain, random_state):
    spec = diagonalize(build_hamiltonian(small_chain))
    psi0 = random_state(4)
    t1, t2 = 37.0, 91.5
    halfway = evolve_unitary(spec, psi0, TimeGrid(np.array([0.0, t1])))[-1]
    two_step = evolve_unitary(spec, halfway, TimeGrid(np.array([0.0, t2 - t1])))[-1]
    direct = evolve_unitary(spec, psi0, TimeGrid(np.array([0.0, t2])))[-1]
    np.testing.assert_allclose(two_step.amplitudes, direct.amplitudes, atol=1e-9)


def test_dephasing_never_raises_purity(random_density):
    H = HermitianOperator(2, np.zeros((4, 4)))
    grid = TimeGrid.uniform(80.0, 17)
    for _ in range(3):
        states = evolve_lindblad_dense(H, random_density(2), grid, DecoherenceParams(T1=None, T2=25.0))
        purities = np.array([rho.purity() for rho in states])
        assert np.all(np.diff(purities) <= 1e-9)
        assert purities[-1] < purities[0]


def test_amplitude_damping_can_purify(qubit_zero_hamiltonian):
    # relaxation toward |+Z> is not unital: a mixed qubit ends up purer
    grid = TimeGrid.uniform(200.0, 11)
    states = evolve_lindblad_dense(qubit_zero_hamiltonian, DensityMatrix.maximally_mixed(1), grid,
                                   DecoherenceParams(T1=20.0, T2=None))
    assert states[-1].purity() > states[0].purity() + 0.4


def _decaying_qubit(n_traj: int, seed: int = 21):
    H = HermitianOperator(1, np.zeros((2, 2)))
    excited = StateVector.basis(1, [1])
    grid = TimeGrid.uniform(100.0, 5)
    return grid, evolve_lindblad_trajectories(H, excited, grid, DecoherenceParams(T1=50.0, T2=None),
                                              n_traj=n_traj, seed=seed, reducers={"sigma_z": sigma_z_reducer(1)})


def test_single_qubit_jumps_follow_the_decay_law():
    n_traj = 2000
    grid, ensemble = _decaying_qubit(n_traj)
    assert set(np.unique(ensemble.jump_counts)) <= {0, 1}
    p_jump = 1.0 - math.exp(-grid.t_max / 50.0)
    sigma = math.sqrt(p_jump * (1 - p_jump) / n_traj)
    assert abs(ensemble.jump_counts.mean() - p_jump) < 4 * sigma
    # every record is +1 after the jump and -1 before it
    decayed = (ensemble.values["sigma_z"] + 1.0) / 2.0
    expected = 1.0 - np.exp(-grid.times / 50.0)
    assert np.all(np.abs(decayed.mean(axis=0) - expected) <= 4 * np.sqrt(expected * (1 - expected) / n_traj) + 1e-12)


def test_trajectory_stderr_shrinks_as_inverse_root_of_count():
    _, small = _decaying_qubit(100)
    _, large = _decaying_qubit(1600)
    ratio = small.stderr("sigma_z")[-1] / large.stderr("sigma_z")[-1]
    assert 2.8 < ratio < 5.6
