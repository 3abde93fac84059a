"""
Canonical ensembles
Gibbs states, the effective-temperature solver and thermal two-site marginals
"""
import logging
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .config import Tolerances
from .observables import concurrence
from .qcore import DensityMatrix, HermitianOperator, StateVector, expectation
from .spectra import SpectralData
from .utils.errors import DomainError, NumericalError, ThermalRangeError, UnreachableTemperatureError

logger = logging.getLogger(__name__)

# Initial bracket of the temperature solver, in units of J*beta
BRACKET_JBETA = 50.0
MAX_BRACKET_EXPANSIONS = 60


@dataclass(frozen=True)
class EffectiveTemperature:
    """Inverse temperature whose canonical energy matches an initial state"""
    beta: float
    beta_dimensionless: float
    residual: float
    target_energy: float


def boltzmann_weights(eigenvalues, beta: float) -> np.ndarray:
    """
    Normalized Gibbs weights exp(-beta E_n) / Z

    The exponent is shifted by its maximum, so only the ratio of weights is
    ever exponentiated.

    Raises:
        ThermalRangeError: beta is not finite
    """
    if not np.isfinite(beta):
        raise ThermalRangeError(f"beta = {beta} is not finite")
    exponent = -beta * np.asarray(eigenvalues, dtype=float)
    weights = np.exp(exponent - exponent.max())
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        raise ThermalRangeError(f"Gibbs weights not representable at beta = {beta}")
    return weights / total


def canonical_energy(eigenvalues, beta: float) -> float:
    """U(beta) = sum_n E_n exp(-beta E_n) / Z"""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    return float(np.dot(boltzmann_weights(eigenvalues, beta), eigenvalues))


def energy_variance(eigenvalues, beta: float) -> float:
    """Var_beta(H) = -dU/dbeta"""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    weights = boltzmann_weights(eigenvalues, beta)
    mean = np.dot(weights, eigenvalues)
    return float(np.dot(weights, (eigenvalues - mean) ** 2))


def thermal_state(spec: SpectralData, beta: float) -> DensityMatrix:
    """rho_beta = V diag(exp(-beta E) / Z) V^dagger"""
    weights = boltzmann_weights(spec.eigenvalues, beta)
    vectors = spec.eigenvectors
    rho = (vectors * weights) @ vectors.conj().T
    # symmetrize away the rounding asymmetry of the product
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(spec.n_sites, rho)


def effective_beta(psi0: StateVector, spec: SpectralData, H: HermitianOperator,
                   tol: Optional[float] = None, coupling_scale: Optional[float] = None) -> EffectiveTemperature:
    """
    Solve U(beta) = <psi0|H|psi0> for the canonical inverse temperature

    Args:
        psi0: Initial state
        spec: Eigendecomposition of H
        H: Hamiltonian (rad/ns)
        tol: Energy tolerance relative to max |H_ij| (default: Tolerances.BETA_ENERGY)
        coupling_scale: J in rad/ns for the dimensionless J*beta (default 1)

    Returns:
        EffectiveTemperature

    Raises:
        UnreachableTemperatureError: target energy at or outside [E_min, E_max]
    """
    tol = Tolerances.BETA_ENERGY if tol is None else tol
    energy_tol = tol * max(H.max_abs(), 1e-300)
    return solve_beta(spec.eigenvalues, expectation(H, psi0), energy_tol, coupling_scale)


def solve_beta(eigenvalues, target: float, energy_tol: float,
               coupling_scale: Optional[float] = None) -> EffectiveTemperature:
    """
    Inverse temperature whose canonical energy equals target

    U is monotonically decreasing in beta, so a sign-changing bracket is
    widened geometrically from J*beta in [-50, 50] and then refined with brentq.

    Args:
        eigenvalues: Ascending spectrum (rad/ns)
        target: Energy to match
        energy_tol: Absolute energy tolerance
        coupling_scale: J in rad/ns for the dimensionless J*beta (default 1)
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    scale = coupling_scale if coupling_scale else 1.0
    e_min, e_max = float(eigenvalues[0]), float(eigenvalues[-1])

    if target <= e_min + energy_tol or target >= e_max - energy_tol:
        raise UnreachableTemperatureError(
            f"target energy {target:.6g} outside the open range ({e_min:.6g}, {e_max:.6g})"
        )

    infinite_temperature_energy = float(np.mean(eigenvalues))
    if abs(target - infinite_temperature_energy) <= energy_tol:
        residual = abs(target - infinite_temperature_energy)
        return EffectiveTemperature(0.0, 0.0, float(residual), float(target))

    def gap(beta: float) -> float:
        return canonical_energy(eigenvalues, beta) - target

    # U decreases with beta: a target above the infinite-temperature energy needs beta < 0
    direction = -1.0 if target > infinite_temperature_energy else 1.0
    far = direction * BRACKET_JBETA / scale
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if np.sign(gap(far)) != np.sign(gap(0.0)):
            break
        far *= 2.0
    else:
        raise UnreachableTemperatureError(f"no bracket found up to beta = {far:.3g}")

    lo, hi = sorted((0.0, far))
    try:
        beta = optimize.brentq(gap, lo, hi, xtol=1e-15 / scale, rtol=4 * np.finfo(float).eps, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NumericalError(f"temperature solver failed: {exc}") from exc

    residual = abs(gap(beta))
    if residual > energy_tol:
        raise NumericalError(f"temperature residual {residual:.3e} above {energy_tol:.3e}")
    logger.debug("effective J*beta %.6f (residual %.2e)", beta * scale, residual)
    return EffectiveTemperature(float(beta), float(beta * scale), float(residual), float(target))


class EigenstateMarginals:
    """
    One- and two-site marginals of every eigenvector, computed on demand

    Thermal marginals at any beta are then a weighted sum over eigenstates.
    Safe to share between worker threads.
    """

    def __init__(self, spec: SpectralData):
        self.spec = spec
        self.n_sites = spec.n_sites
        self._pairs: Dict[int, np.ndarray] = {}
        self._singles: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _block(self, site: int, width: int) -> np.ndarray:
        left = 2 ** (site - 1)
        right = 2 ** (self.n_sites - site - width + 1)
        tensor = self.spec.eigenvectors.reshape(left, 2 ** width, right, -1)
        return np.einsum("iakn,ibkn->nab", tensor, tensor.conj(), optimize=True)

    def pair(self, j: int) -> np.ndarray:
        """Marginals on (j, j+1) of all eigenvectors, shape (dim, 4, 4)"""
        if not 1 <= j <= self.n_sites - 1:
            raise DomainError(f"pair index {j} outside [1, {self.n_sites - 1}]")
        with self._lock:
            if j not in self._pairs:
                self._pairs[j] = self._block(j, 2)
            return self._pairs[j]

    def single(self, j: int) -> np.ndarray:
        """Marginals on site j of all eigenvectors, shape (dim, 2, 2)"""
        if not 1 <= j <= self.n_sites:
            raise DomainError(f"site index {j} outside [1, {self.n_sites}]")
        with self._lock:
            if j not in self._singles:
                self._singles[j] = self._block(j, 1)
            return self._singles[j]

    def thermal_pair(self, beta: float, j: int) -> np.ndarray:
        weights = boltzmann_weights(self.spec.eigenvalues, beta)
        return np.tensordot(weights, self.pair(j), axes=1)

    def thermal_single(self, beta: float, j: int) -> np.ndarray:
        weights = boltzmann_weights(self.spec.eigenvalues, beta)
        return np.tensordot(weights, self.single(j), axes=1)

    def thermal_pairs(self, beta: float) -> Tuple[np.ndarray, ...]:
        """All adjacent-pair marginals of rho_beta"""
        weights = boltzmann_weights(self.spec.eigenvalues, beta)
        return tuple(np.tensordot(weights, self.pair(j), axes=1) for j in range(1, self.n_sites))


def thermal_reduced(spec: SpectralData, beta: float, sites: Tuple[int, int],
                    marginals: Optional[EigenstateMarginals] = None) -> DensityMatrix:
    """
    Two-site marginal of rho_beta on an adjacent pair

    Raises:
        DomainError: the pair is not (j, j+1) inside the chain
    """
    j, k = sites
    if k != j + 1 or not 1 <= j <= spec.n_sites - 1:
        raise DomainError(f"sites {sites} are not an adjacent pair of the chain")
    marginals = marginals or EigenstateMarginals(spec)
    return DensityMatrix(2, marginals.thermal_pair(beta, j))


def thermal_concurrence_curve(spec: SpectralData, betas: Sequence[float],
                              marginals: Optional[EigenstateMarginals] = None) -> np.ndarray:
    """Site-averaged concurrence of the adjacent-pair marginals of rho_beta, per beta"""
    if spec.n_sites < 2:
        raise DomainError("thermal concurrence needs at least two sites")
    marginals = marginals or EigenstateMarginals(spec)
    curve = np.empty(len(betas))
    for i, beta in enumerate(betas):
        pairs = marginals.thermal_pairs(beta)
        curve[i] = np.mean([concurrence(DensityMatrix(2, rho)).value for rho in pairs])
    return curve
