"""
Local observables
Mean sigma^z, single-site entanglement entropy, the Page value, two-site
marginals, trace distance, concurrence and time averages
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from .config import Tolerances
from .evaluation.metrics import MetricsCalculator
from .qcore import DensityMatrix, StateVector, partial_trace, reduced_matrix
from .utils.errors import DomainError, NumericalConsistencyError

logger = logging.getLogger(__name__)

SIGMA_Y_PAIR = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
SIGMA_Z = np.diag([1.0, -1.0])

State = Union[StateVector, DensityMatrix]
MatrixLike = Union[DensityMatrix, np.ndarray]


def _elements(rho: MatrixLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.elements
    return np.asarray(rho, dtype=complex)


@dataclass(frozen=True)
class ConcurrenceSpectrum:
    """Eigenvalues of Gamma in decreasing order and the resulting concurrence"""
    gammas: Tuple[float, float, float, float]
    value: float


@dataclass(frozen=True, eq=False)
class LocalMarginals:
    """
    All one-site marginals and adjacent two-site marginals of a state

    singles has shape (n_sites, 2, 2), pairs has shape (n_sites - 1, 4, 4).
    Marginals are linear in the state, so trajectory ensembles are averaged here.
    """
    n_sites: int
    singles: np.ndarray
    pairs: np.ndarray

    @classmethod
    def from_state(cls, state: Union[State, np.ndarray], n_sites: Optional[int] = None) -> "LocalMarginals":
        """Marginals of a StateVector, DensityMatrix, or raw vector / matrix"""
        if isinstance(state, (StateVector, DensityMatrix)):
            n_sites = state.n_sites
            data = state.amplitudes if isinstance(state, StateVector) else state.elements
        else:
            data = np.asarray(state, dtype=complex)
            n_sites = n_sites or int(round(math.log2(data.shape[0])))

        if data.ndim == 1:
            singles = np.stack([_vector_block(data, n_sites, j, 1) for j in range(1, n_sites + 1)])
            pairs = [_vector_block(data, n_sites, j, 2) for j in range(1, n_sites)]
        else:
            singles = np.stack([reduced_matrix(data, n_sites, [j]) for j in range(1, n_sites + 1)])
            pairs = [reduced_matrix(data, n_sites, [j, j + 1]) for j in range(1, n_sites)]
        pairs = np.stack(pairs) if pairs else np.zeros((0, 4, 4), dtype=complex)
        return cls(n_sites, singles, pairs)

    @classmethod
    def average(cls, items: Sequence["LocalMarginals"]) -> "LocalMarginals":
        if not items:
            raise DomainError("cannot average an empty list of marginals")
        return cls(
            items[0].n_sites,
            np.mean([m.singles for m in items], axis=0),
            np.mean([m.pairs for m in items], axis=0),
        )

    def sigma_z(self) -> np.ndarray:
        return np.real(self.singles[:, 0, 0] - self.singles[:, 1, 1])

    def mean_sigma_z(self) -> float:
        return float(np.mean(self.sigma_z()))

    def entropies(self) -> np.ndarray:
        return np.array([von_neumann_entropy(rho) for rho in self.singles])

    def mean_entropy(self) -> float:
        return float(np.mean(self.entropies()))

    def concurrences(self) -> np.ndarray:
        return np.array([concurrence(rho).value for rho in self.pairs])

    def mean_concurrence(self) -> float:
        if self.n_sites < 2:
            raise DomainError("concurrence needs at least two sites")
        return float(np.mean(self.concurrences()))

    def mean_trace_distance(self, references: Sequence[np.ndarray]) -> float:
        """Site-averaged trace distance of the pair marginals to reference pair states"""
        if len(references) != len(self.pairs):
            raise DomainError(f"{len(references)} reference pairs for {len(self.pairs)} bonds")
        return float(np.mean([trace_distance(rho, ref) for rho, ref in zip(self.pairs, references)]))


def _vector_block(psi: np.ndarray, n_sites: int, site: int, width: int) -> np.ndarray:
    left = 2 ** (site - 1)
    right = 2 ** (n_sites - site - width + 1)
    tensor = psi.reshape(left, 2 ** width, right)
    return np.einsum("iak,ibk->ab", tensor, tensor.conj())


def mean_sigma_z(state: State) -> float:
    """Site-averaged <sigma^z_j>"""
    if isinstance(state, StateVector):
        probabilities = state.probabilities().reshape([2] * state.n_sites)
    else:
        probabilities = np.real(np.diag(state.elements)).reshape([2] * state.n_sites)
    total = 0.0
    for axis in range(state.n_sites):
        marginal = probabilities.sum(axis=tuple(a for a in range(state.n_sites) if a != axis))
        total += marginal[0] - marginal[1]
    return float(np.clip(total / state.n_sites, -1.0, 1.0))


def von_neumann_entropy(rho: MatrixLike) -> float:
    """-Tr rho ln rho; eigenvalues below the cutoff contribute nothing"""
    eigenvalues = np.linalg.eigvalsh(_elements(rho))
    p = eigenvalues[eigenvalues > Tolerances.ENTROPY_CUTOFF]
    return float(max(0.0, -np.sum(p * np.log(p))))


def single_site_entropy(state: State, site: int) -> float:
    """Entanglement entropy of one site with the rest of the chain"""
    return von_neumann_entropy(partial_trace(state, [site]))


def site_averaged_entropy(state: State) -> float:
    return LocalMarginals.from_state(state).mean_entropy()


def page_value(n_sites: int) -> float:
    """Average one-site entropy of a Haar-random pure state: ln 2 - 2 / (2 * 2^(n-1))"""
    if n_sites < 2:
        raise DomainError("the Page value needs at least two sites")
    m, n_env = 2, 2 ** (n_sites - 1)
    return math.log(m) - m / (2 * n_env)


def two_site_reduced(state: State, j: int) -> DensityMatrix:
    """Marginal on sites (j, j+1)"""
    if not 1 <= j <= state.n_sites - 1:
        raise DomainError(f"pair index {j} outside [1, {state.n_sites - 1}]")
    return partial_trace(state, [j, j + 1])


def trace_distance(rho: MatrixLike, sigma: MatrixLike) -> float:
    """Half the sum of absolute eigenvalues of rho - sigma"""
    a, b = _elements(rho), _elements(sigma)
    if a.shape != b.shape:
        raise DomainError(f"trace distance between shapes {a.shape} and {b.shape}")
    difference = a - b
    eigenvalues = np.linalg.eigvalsh(0.5 * (difference + difference.conj().T))
    return float(np.clip(0.5 * np.abs(eigenvalues).sum(), 0.0, 1.0))


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(rho)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def concurrence(rho: MatrixLike) -> ConcurrenceSpectrum:
    """
    Wootters concurrence of a two-qubit state

    The spectrum of Gamma = rho (Y x Y) rho^* (Y x Y) is read from the Hermitian
    matrix sqrt(rho) (Y x Y) rho^* (Y x Y) sqrt(rho), which has the same eigenvalues.
    Conjugation is taken in the computational basis.

    Raises:
        DomainError: not a 4 x 4 matrix
        NumericalConsistencyError: an eigenvalue below -GAMMA_ERROR
    """
    elements = _elements(rho)
    if elements.shape != (4, 4):
        raise DomainError(f"concurrence needs a 4x4 density matrix, got {elements.shape}")
    root = _psd_sqrt(elements)
    flipped = SIGMA_Y_PAIR @ elements.conj() @ SIGMA_Y_PAIR
    product = root @ flipped @ root
    gammas = np.sort(np.linalg.eigvalsh(0.5 * (product + product.conj().T)))[::-1]

    if gammas[-1] < -Tolerances.GAMMA_ERROR:
        raise NumericalConsistencyError(f"Gamma has eigenvalue {gammas[-1]:.3e}")
    if gammas[-1] < -Tolerances.GAMMA_CLAMP:
        logger.debug("clamping Gamma eigenvalue %.3e", gammas[-1])
    gammas = np.clip(gammas, 0.0, None)
    roots = np.sqrt(gammas)
    value = max(0.0, roots[0] - roots[1] - roots[2] - roots[3])
    return ConcurrenceSpectrum(tuple(float(g) for g in gammas), float(min(value, 1.0)))


def batch_site_averaged_entropy(vectors: np.ndarray, n_sites: int) -> np.ndarray:
    """
    Site-averaged single-site entropy of every column of a (2^n, S) state batch

    Each one-site marginal is fixed by its Bloch vector r, with eigenvalues (1 +- |r|) / 2.
    """
    total = np.zeros(vectors.shape[1])
    for site in range(1, n_sites + 1):
        tensor = vectors.reshape(2 ** (site - 1), 2, 2 ** (n_sites - site), -1)
        p_excited = np.einsum("iks,iks->s", tensor[:, 1], tensor[:, 1].conj()).real
        coherence = np.einsum("iks,iks->s", tensor[:, 0], tensor[:, 1].conj())
        z = 1.0 - 2.0 * p_excited
        radius = np.clip(np.sqrt(z ** 2 + 4.0 * np.abs(coherence) ** 2), 0.0, 1.0)
        for p in (0.5 * (1 + radius), 0.5 * (1 - radius)):
            safe = np.where(p > Tolerances.ENTROPY_CUTOFF, p, 1.0)
            total -= np.where(p > Tolerances.ENTROPY_CUTOFF, p * np.log(safe), 0.0)
    return total / n_sites


def site_averaged_concurrence(state: State) -> float:
    return LocalMarginals.from_state(state).mean_concurrence()


def time_average(traj, key: str, window: Tuple[float, float]) -> float:
    """
    Trapezoidal mean of a recorded observable over [t_lo, t_hi]

    Args:
        traj: Object exposing times and column(key), such as a Trajectory
        key: Observable name
        window: (t_lo, t_hi) in ns

    Raises:
        DomainError: fewer than two grid points inside the window
    """
    times = np.asarray(traj.times, dtype=float)
    values = np.asarray(traj.column(key), dtype=float)
    mask = MetricsCalculator.window_mask(times, window)
    if np.count_nonzero(mask) < 2:
        raise DomainError(f"window {window} holds fewer than two grid points")
    t, y = times[mask], values[mask]
    return float(integrate.trapezoid(y, t) / (t[-1] - t[0]))
