import math

import numpy as np
import pytest
from scipy import sparse

from thermalize.qcore import (
    DensityMatrix,
    HermitianOperator,
    StateVector,
    apply,
    commutator_norm,
    expectation,
    matrix_function,
    partial_trace,
    pauli_string,
    pauli_sum,
    reduced_matrix,
)
from thermalize.utils.errors import DomainError, NumericalConsistencyError


def _bits(index: int, n_sites: int):
    return [(index >> (n_sites - 1 - k)) & 1 for k in range(n_sites)]


def brute_force_partial_trace(rho: np.ndarray, n_sites: int, keep):
    """Index-summation oracle"""
    dim = 2 ** n_sites
    out = np.zeros((2 ** len(keep),) * 2, dtype=complex)
    traced = [s for s in range(1, n_sites + 1) if s not in keep]
    for i in range(dim):
        bi = _bits(i, n_sites)
        for j in range(dim):
            bj = _bits(j, n_sites)
            if any(bi[s - 1] != bj[s - 1] for s in traced):
                continue
            a = int("".join(str(bi[s - 1]) for s in keep), 2)
            b = int("".join(str(bj[s - 1]) for s in keep), 2)
            out[a, b] += rho[i, j]
    return out


def test_site_one_is_most_significant_bit():
    z1 = pauli_string(2, [(1, "z")]).dense()
    np.testing.assert_allclose(np.diag(z1).real, [1, 1, -1, -1])
    z2 = pauli_string(2, [(2, "z")]).dense()
    np.testing.assert_allclose(np.diag(z2).real, [1, -1, 1, -1])


def test_x_flips_the_addressed_site():
    psi = StateVector.basis(3, [0, 0, 0])
    flipped = apply(pauli_string(3, [(2, "x")]), psi)
    assert abs(flipped[0b010]) == pytest.approx(1.0)


def test_ladder_operators_raise_and_lower_the_excited_bit():
    raise_op = pauli_string(1, [(1, "+")])
    lower_op = pauli_string(1, [(1, "-")])
    assert not raise_op.hermitian
    np.testing.assert_allclose(apply(raise_op, np.array([1, 0])), [0, 1])
    np.testing.assert_allclose(apply(lower_op, np.array([0, 1])), [1, 0])
    # n = s+ s- projects on |-Z>
    number = (raise_op @ lower_op).dense()
    np.testing.assert_allclose(number, np.diag([0, 1]))


def test_unicode_minus_is_accepted():
    np.testing.assert_allclose(pauli_string(2, [(1, "−")]).dense(), pauli_string(2, [(1, "-")]).dense())


def test_pauli_string_rejects_bad_sites():
    with pytest.raises(DomainError):
        pauli_string(3, [(1, "x"), (1, "z")])
    with pytest.raises(DomainError):
        pauli_string(3, [(4, "x")])
    with pytest.raises(DomainError):
        pauli_string(3, [(1, "w")])


def test_hermitian_flag_is_checked():
    with pytest.raises(NumericalConsistencyError):
        HermitianOperator(1, np.array([[0, 1], [0, 0]]))
    assert not HermitianOperator(1, np.array([[0, 1], [0, 0]]), hermitian=False).hermitian


def test_state_norm_is_enforced():
    with pytest.raises(NumericalConsistencyError):
        StateVector(1, np.array([1.0, 1.0]))
    psi = StateVector.normalized(1, np.array([1.0, 1.0]))
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        StateVector.normalized(1, np.zeros(2))


def test_density_matrix_invariants():
    with pytest.raises(NumericalConsistencyError):
        DensityMatrix(1, np.diag([1.5, -0.5]))
    with pytest.raises(NumericalConsistencyError):
        DensityMatrix(1, np.diag([0.5, 0.6]))
    with pytest.raises(NumericalConsistencyError):
        DensityMatrix(1, np.array([[0.5, 0.1], [0.2, 0.5]]))
    assert DensityMatrix.maximally_mixed(2).purity() == pytest.approx(0.25)


def test_partial_trace_matches_index_summation(random_density):
    rho = random_density(3)
    for keep in ([1], [2], [3], [1, 3], [2, 3]):
        expected = brute_force_partial_trace(rho.elements, 3, keep)
        np.testing.assert_allclose(partial_trace(rho, keep).elements, expected, atol=1e-12)


def test_pure_partial_trace_matches_density_path(random_state):
    psi = random_state(4)
    rho = psi.density_matrix()
    for keep in ([1], [2, 3], [1, 4]):
        np.testing.assert_allclose(
            reduced_matrix(psi, 4, keep),
            brute_force_partial_trace(rho.elements, 4, keep),
            atol=1e-12,
        )


def test_partial_trace_rejects_unsorted_sites(random_state):
    with pytest.raises(DomainError):
        partial_trace(random_state(3), [2, 1])
    with pytest.raises(DomainError):
        partial_trace(random_state(3), [])


def test_expectation_matches_dense_oracle(rng, random_state, random_density):
    terms = [(float(rng.normal()), [(1, "x"), (2, "y")]), (float(rng.normal()), [(3, "z")]),
             (float(rng.normal()), [])]
    op = pauli_sum(3, terms)
    psi = random_state(3)
    dense = op.dense()
    assert expectation(op, psi) == pytest.approx(np.vdot(psi.amplitudes, dense @ psi.amplitudes).real, abs=1e-12)
    rho = random_density(3)
    assert expectation(op, rho) == pytest.approx(np.trace(rho.elements @ dense).real, abs=1e-12)


def test_expectation_requires_hermitian_operator(random_state):
    with pytest.raises(DomainError):
        expectation(pauli_string(2, [(1, "+")]), random_state(2))


def test_commutator_norm():
    x1 = pauli_string(2, [(1, "x")])
    assert commutator_norm(x1, pauli_string(2, [(2, "z")])) == 0.0
    assert commutator_norm(x1, pauli_string(2, [(1, "z")])) == pytest.approx(2.0)


def test_matrix_function_exponential_is_unitary():
    op = pauli_sum(2, [(0.3, [(1, "x"), (2, "x")]), (0.7, [(2, "z")])])
    t = 1.7
    u = matrix_function(op, lambda e: np.exp(-1j * e * t))
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
    single = matrix_function(pauli_string(1, [(1, "z")]), lambda e: np.exp(-1j * e * t))
    np.testing.assert_allclose(np.diag(single), [np.exp(-1j * t), np.exp(1j * t)], atol=1e-12)


def test_operator_arithmetic_keeps_flags():
    x = pauli_string(1, [(1, "x")])
    z = pauli_string(1, [(1, "z")])
    assert (x + z).hermitian
    assert not (x * 1j).hermitian
    assert (2.0 * x).max_abs() == pytest.approx(2.0)
    assert x.plus_identity(0.5).trace() == pytest.approx(1.0)
    assert math.isclose(abs((x @ z).trace()), 0.0)


def test_pauli_algebra():
    x, y, z = (pauli_string(1, [(1, axis)]).dense() for axis in "xyz")
    for sigma in (x, y, z):
        np.testing.assert_allclose(sigma @ sigma, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(x @ y, 1j * z, atol=1e-15)
    np.testing.assert_allclose(y @ z, 1j * x, atol=1e-15)
    np.testing.assert_allclose(z @ x, 1j * y, atol=1e-15)


def test_partial_traces_compose(random_state):
    psi = random_state(5)
    # sites 2 and 4 of the kept triple (1, 2, 4) are sites 2 and 3 of the reduced state
    nested = partial_trace(partial_trace(psi, [1, 2, 4]), [2, 3])
    np.testing.assert_allclose(nested.elements, partial_trace(psi, [2, 4]).elements, atol=1e-12)


def test_sparse_and_dense_application_agree(rng, random_state):
    dim = 2 ** 4
    for _ in range(5):
        matrix = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        matrix[rng.random((dim, dim)) < 0.7] = 0.0
        dense_op = HermitianOperator(4, matrix, hermitian=False)
        sparse_op = HermitianOperator(4, sparse.csr_matrix(matrix), hermitian=False)
        psi = random_state(4)
        np.testing.assert_allclose(apply(sparse_op, psi), apply(dense_op, psi), atol=1e-12)
        np.testing.assert_allclose(apply(dense_op, psi), matrix @ psi.amplitudes, atol=1e-12)


def test_matrix_exponential_matches_taylor_series(rng):
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    op = HermitianOperator(3, (a + a.conj().T) / 8)
    generator = -1j * op.dense()
    expected, term = np.eye(8, dtype=complex), np.eye(8, dtype=complex)
    for k in range(1, 40):
        term = term @ generator / k
        expected = expected + term
    np.testing.assert_allclose(matrix_function(op, lambda e: np.exp(-1j * e)), expected, atol=1e-12)


def test_large_density_matrices_still_check_trace_and_hermiticity():
    dim = 2 ** 9
    with pytest.raises(NumericalConsistencyError):
        DensityMatrix(9, 2 * np.eye(dim) / dim)
    skew = np.eye(dim, dtype=complex) / dim
    skew[0, 1] = 1e-3
    with pytest.raises(NumericalConsistencyError):
        DensityMatrix(9, skew)
    # positivity is only verified on small matrices
    indefinite = np.eye(dim) / dim
    indefinite[0, 0], indefinite[1, 1] = -0.01, indefinite[1, 1] + 0.01 + 1.0 / dim
    assert DensityMatrix(9, indefinite).dim == dim
