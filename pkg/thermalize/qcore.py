"""
State and operator algebra
Basis conventions, Pauli strings, partial traces, expectation values and matrix functions

Basis convention: site 1 is the most significant bit of the computational-basis
index; bit 0 is |+Z> (sigma^z = +1), bit 1 is |-Z> (sigma^z = -1). Bit 1 is the
excited qubit state, so sigma^- = |+Z><-Z| and sigma^+ = |-Z><+Z|.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy import sparse

from .config import Limits, Tolerances
from .utils.errors import DomainError, NumericalConsistencyError, NumericalError

logger = logging.getLogger(__name__)

SINGLE_SITE_MATRICES = {
    "i": np.array([[1, 0], [0, 1]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
}
HERMITIAN_AXES = {"i", "x", "y", "z"}
_AXIS_ALIASES = {"−": "-", "X": "x", "Y": "y", "Z": "z", "I": "i"}

Factor = Tuple[int, str]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """
    Operator on the 2^n_sites Hilbert space

    Storage is either a dense ndarray or a scipy CSR matrix. The hermitian flag is
    False for operators built from sigma^+ / sigma^- factors or from products.
    """
    n_sites: int
    matrix: Union[np.ndarray, sparse.csr_matrix]
    hermitian: bool = True

    def __post_init__(self):
        dim = 2 ** self.n_sites
        if self.matrix.shape != (dim, dim):
            raise DomainError(
                f"operator shape {self.matrix.shape} does not match {self.n_sites} sites"
            )
        if sparse.issparse(self.matrix):
            object.__setattr__(self, "matrix", sparse.csr_matrix(self.matrix, dtype=complex))
        else:
            object.__setattr__(self, "matrix", _frozen(np.array(self.matrix, dtype=complex)))
        if self.hermitian:
            deviation = self._hermitian_deviation()
            scale = max(1.0, self.max_abs())
            if deviation > Tolerances.OPERATOR_HERMITIAN * scale:
                raise NumericalConsistencyError(
                    f"operator flagged hermitian deviates by {deviation:.3e}"
                )

    def _hermitian_deviation(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        if sparse.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        """Dense copy of the matrix"""
        if self.is_sparse:
            return self.matrix.toarray()
        return np.array(self.matrix)

    def sparse(self) -> sparse.csr_matrix:
        """CSR copy of the matrix"""
        if self.is_sparse:
            return self.matrix.copy()
        return sparse.csr_matrix(self.matrix)

    def max_abs(self) -> float:
        """Largest absolute matrix element"""
        if self.is_sparse:
            return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0
        return float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0

    def _combine(self, other: "HermitianOperator", sign: float) -> "HermitianOperator":
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        if other.n_sites != self.n_sites:
            raise DomainError("operators act on different numbers of sites")
        if self.is_sparse and other.is_sparse:
            matrix = self.matrix + sign * other.matrix
        else:
            matrix = self.dense() + sign * other.dense()
        return HermitianOperator(self.n_sites, matrix, self.hermitian and other.hermitian)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        hermitian = self.hermitian and abs(np.imag(scalar)) == 0.0
        return HermitianOperator(self.n_sites, self.matrix * scalar, hermitian)

    __rmul__ = __mul__

    def __matmul__(self, other: "HermitianOperator") -> "HermitianOperator":
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        if other.n_sites != self.n_sites:
            raise DomainError("operators act on different numbers of sites")
        return HermitianOperator(self.n_sites, self.matrix @ other.matrix, hermitian=False)

    def plus_identity(self, shift: float) -> "HermitianOperator":
        """Return op + shift * I, preserving the storage kind"""
        if self.is_sparse:
            matrix = self.matrix + shift * sparse.identity(self.dim, dtype=complex, format="csr")
        else:
            matrix = self.dense() + shift * np.eye(self.dim)
        return HermitianOperator(self.n_sites, matrix, self.hermitian)

    def trace(self) -> complex:
        return complex(self.matrix.diagonal().sum())


def commutator_norm(a: HermitianOperator, b: HermitianOperator) -> float:
    """Largest absolute element of [a, b]"""
    comm = a.matrix @ b.matrix - b.matrix @ a.matrix
    if sparse.issparse(comm):
        return float(abs(comm).max()) if comm.nnz else 0.0
    return float(np.max(np.abs(comm)))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state with complex amplitudes over the 2^n_sites basis"""
    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_sites < 1:
            raise DomainError("n_sites must be positive")
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != 2 ** self.n_sites:
            raise DomainError(
                f"{amplitudes.size} amplitudes do not match {self.n_sites} sites"
            )
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > Tolerances.NORM:
            raise NumericalConsistencyError(f"state norm {norm:.15f} differs from 1")
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    @classmethod
    def normalized(cls, n_sites: int, amplitudes: np.ndarray) -> "StateVector":
        """Build a state after rescaling the amplitudes to unit norm"""
        amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amplitudes)
        if norm == 0.0:
            raise DomainError("cannot normalize the zero vector")
        return cls(n_sites, amplitudes / norm)

    @classmethod
    def basis(cls, n_sites: int, bits: Sequence[int]) -> "StateVector":
        """Computational basis state; bits[0] is site 1"""
        if len(bits) != n_sites or any(b not in (0, 1) for b in bits):
            raise DomainError(f"invalid bit string {bits} for {n_sites} sites")
        index = int("".join(str(b) for b in bits), 2)
        amplitudes = np.zeros(2 ** n_sites, dtype=complex)
        amplitudes[index] = 1.0
        return cls(n_sites, amplitudes)

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.n_sites, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian, unit-trace, positive-semidefinite operator

    Hermiticity and the trace are checked at every size. Positivity needs a full
    eigendecomposition and is only checked up to Limits.POSITIVITY_CHECK_MAX_DIM
    (eight sites by default).
    """
    n_sites: int
    elements: np.ndarray

    def __post_init__(self):
        dim = 2 ** self.n_sites
        elements = np.array(self.elements, dtype=complex)
        if elements.shape != (dim, dim):
            raise DomainError(
                f"density matrix shape {elements.shape} does not match {self.n_sites} sites"
            )
        deviation = float(np.max(np.abs(elements - elements.conj().T)))
        if deviation > Tolerances.HERMITIAN:
            raise NumericalConsistencyError(f"density matrix not Hermitian ({deviation:.3e})")
        trace = np.trace(elements).real
        if abs(trace - 1.0) > Tolerances.TRACE:
            raise NumericalConsistencyError(f"density matrix trace {trace:.15f} differs from 1")
        if dim <= Limits.POSITIVITY_CHECK_MAX_DIM:
            min_eig = float(np.linalg.eigvalsh(elements).min())
            if min_eig < -Tolerances.POSITIVITY:
                raise NumericalConsistencyError(
                    f"density matrix has negative eigenvalue {min_eig:.3e}"
                )
        object.__setattr__(self, "elements", _frozen(elements))

    @classmethod
    def maximally_mixed(cls, n_sites: int) -> "DensityMatrix":
        dim = 2 ** n_sites
        return cls(n_sites, np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    def purity(self) -> float:
        return float(np.real(np.vdot(self.elements, self.elements)))


State = Union[StateVector, DensityMatrix]


def _normalize_axis(axis: str) -> str:
    axis = _AXIS_ALIASES.get(axis, axis)
    if axis not in SINGLE_SITE_MATRICES:
        raise DomainError(f"unknown Pauli axis {axis!r}")
    return axis


def _check_sites(n_sites: int, sites: Iterable[int]) -> List[int]:
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise DomainError(f"duplicate site index in {sites}")
    for site in sites:
        if not (1 <= site <= n_sites):
            raise DomainError(f"site index {site} outside [1, {n_sites}]")
    return sites


def pauli_string(n_sites: int, factors: Sequence[Factor]) -> HermitianOperator:
    """
    Tensor product of single-site operators with identity elsewhere

    Args:
        n_sites: Number of sites
        factors: (site, axis) pairs with axis in {x, y, z, +, -}; sites 1-based and distinct

    Returns:
        Sparse operator; flagged non-Hermitian when a +/- factor is present
    """
    if n_sites < 1:
        raise DomainError("n_sites must be positive")
    sites = _check_sites(n_sites, [site for site, _ in factors])
    axes = {site: _normalize_axis(axis) for site, (_, axis) in zip(sites, factors)}

    matrix = sparse.identity(1, dtype=complex, format="csr")
    for site in range(1, n_sites + 1):
        single = SINGLE_SITE_MATRICES[axes.get(site, "i")]
        matrix = sparse.kron(matrix, sparse.csr_matrix(single), format="csr")
    hermitian = all(axis in HERMITIAN_AXES for axis in axes.values())
    return HermitianOperator(n_sites, matrix, hermitian)


def pauli_sum(n_sites: int, terms: Sequence[Tuple[complex, Sequence[Factor]]]) -> HermitianOperator:
    """
    Weighted sum of Pauli strings

    Args:
        n_sites: Number of sites
        terms: (coefficient, factors) pairs; an empty factor list is the identity

    Returns:
        Sparse operator, flagged Hermitian when every term is a real multiple of a Hermitian string
    """
    dim = 2 ** n_sites
    matrix = sparse.csr_matrix((dim, dim), dtype=complex)
    hermitian = True
    for coefficient, factors in terms:
        string = pauli_string(n_sites, factors)
        matrix = matrix + coefficient * string.matrix
        hermitian = hermitian and string.hermitian and np.imag(coefficient) == 0
    matrix.eliminate_zeros()
    return HermitianOperator(n_sites, matrix, hermitian)


def _amplitudes(psi: Union[StateVector, np.ndarray]) -> np.ndarray:
    if isinstance(psi, StateVector):
        return psi.amplitudes
    return np.asarray(psi, dtype=complex)


def apply(op: HermitianOperator, psi: Union[StateVector, np.ndarray]) -> np.ndarray:
    """Return op @ psi as a complex array"""
    vector = _amplitudes(psi)
    if vector.shape[0] != op.dim:
        raise DomainError(f"state of dimension {vector.shape[0]} vs operator of dimension {op.dim}")
    return np.asarray(op.matrix @ vector)


def expectation(op: HermitianOperator, state: State) -> float:
    """
    <psi|op|psi> or Tr(rho op) for a Hermitian operator

    Raises:
        DomainError: dimension mismatch or non-Hermitian operator
        NumericalConsistencyError: imaginary part above tolerance
    """
    if not op.hermitian:
        raise DomainError("expectation requires a Hermitian operator")
    if isinstance(state, StateVector):
        value = np.vdot(state.amplitudes, apply(op, state))
    elif isinstance(state, DensityMatrix):
        if state.dim != op.dim:
            raise DomainError(f"state of dimension {state.dim} vs operator of dimension {op.dim}")
        if op.is_sparse:
            value = op.matrix.multiply(state.elements.T).sum()
        else:
            value = np.sum(op.matrix * state.elements.T)
    else:
        raise DomainError(f"unsupported state type {type(state).__name__}")

    if abs(value.imag) > Tolerances.IMAG_ERROR:
        raise NumericalConsistencyError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def _check_keep(n_sites: int, keep: Sequence[int]) -> List[int]:
    keep = list(keep)
    if not keep:
        raise DomainError("partial trace needs at least one kept site")
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise DomainError(f"kept sites {keep} must be strictly increasing")
    return _check_sites(n_sites, keep)


def reduced_matrix(state: Union[State, np.ndarray], n_sites: int, keep: Sequence[int]) -> np.ndarray:
    """
    Marginal on the kept sites as a plain array (no invariant checks)

    Accepts a state vector (1-d) or density matrix (2-d) array, or the typed wrappers.
    """
    if isinstance(state, StateVector):
        state = state.amplitudes
    elif isinstance(state, DensityMatrix):
        state = state.elements
    keep_axes = [site - 1 for site in keep]
    traced_axes = [axis for axis in range(n_sites) if axis not in keep_axes]
    d_keep = 2 ** len(keep_axes)
    d_env = 2 ** len(traced_axes)

    if state.ndim == 1:
        tensor = state.reshape([2] * n_sites).transpose(keep_axes + traced_axes)
        matrix = tensor.reshape(d_keep, d_env)
        return matrix @ matrix.conj().T

    tensor = state.reshape([2] * (2 * n_sites))
    order = keep_axes + traced_axes + [n_sites + a for a in keep_axes] + [n_sites + a for a in traced_axes]
    tensor = tensor.transpose(order).reshape(d_keep, d_env, d_keep, d_env)
    return np.einsum("iaja->ij", tensor)


def partial_trace(state: State, keep: Sequence[int]) -> DensityMatrix:
    """
    Reduced density matrix on the kept sites

    Args:
        state: StateVector or DensityMatrix
        keep: Strictly increasing 1-based site indices

    Returns:
        DensityMatrix on len(keep) sites
    """
    keep = _check_keep(state.n_sites, keep)
    return DensityMatrix(len(keep), reduced_matrix(state, state.n_sites, keep))


def hermitian_eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full eigendecomposition of a dense Hermitian matrix

    Real-valued input uses the real symmetric solver.

    Raises:
        NumericalError: the eigensolver did not converge
    """
    if np.iscomplexobj(matrix) and not np.any(matrix.imag):
        matrix = matrix.real
    try:
        return scipy.linalg.eigh(matrix, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc


def matrix_function(op: HermitianOperator, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    V f(Lambda) V^dagger from the eigendecomposition of a Hermitian operator

    Args:
        op: Hermitian operator
        f: Function applied to the eigenvalues (vectorized over an array)

    Returns:
        Dense matrix
    """
    if not op.hermitian:
        raise DomainError("matrix_function requires a Hermitian operator")
    dense = op.dense()
    eigenvalues, vectors = hermitian_eigh(dense)

    if op.dim <= Limits.RESIDUAL_CHECK_MAX_DIM:
        rebuilt = (vectors * eigenvalues) @ vectors.conj().T
        error = float(np.max(np.abs(rebuilt - dense)))
        if error > Tolerances.RECONSTRUCTION * max(1.0, op.max_abs()):
            raise NumericalError(f"eigendecomposition reconstruction error {error:.3e}")

    values = np.asarray(f(eigenvalues))
    if values.shape != eigenvalues.shape:
        values = np.array([f(x) for x in eigenvalues])
    return (vectors * values) @ vectors.conj().T
