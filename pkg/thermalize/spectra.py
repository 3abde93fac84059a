"""
Spectral analysis
Eigendecomposition, normalized energy, density of states, level-spacing ratios,
the GOE surmise and the free-fermion spectrum of the integrable limit
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .config import Limits, RunnerDefaults, Tolerances
from .evaluation.metrics import MetricsCalculator
from .hamiltonian import (
    ChainConfig,
    build_hamiltonian,
    field_values,
    has_y_parity,
    is_reflection_symmetric,
    rotate_from_y_frame,
)
from .qcore import HermitianOperator, StateVector, expectation, hermitian_eigh
from .utils.errors import DegenerateSpectrumError, DomainError, NumericalConsistencyError, NumericalError

logger = logging.getLogger(__name__)

# Fewest levels left after edge trimming for a ratio analysis
MIN_RATIO_LEVELS = 10
REFLECTION_WARNING = "mirror-symmetric chain: unresolved reflection sectors bias r downward"


@dataclass(frozen=True, eq=False)
class SpectralData:
    """
    Ascending eigenvalues (rad/ns) and the matching eigenvector columns

    sectors holds the y-parity label (+1 / -1) of each level when the
    spectrum was resolved by symmetry sector, None otherwise. reflection_symmetric
    marks a chain whose mirror symmetry is left unresolved.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int
    n_sites: int
    sectors: Optional[np.ndarray] = None
    reflection_symmetric: bool = False

    def __post_init__(self):
        eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(eigenvalues) < 0):
            raise NumericalConsistencyError("eigenvalues are not sorted ascending")
        if self.eigenvectors.shape != (self.source_dim, eigenvalues.size):
            raise DomainError(
                f"eigenvector matrix of shape {self.eigenvectors.shape} for {eigenvalues.size} levels"
            )
        if self.source_dim <= Limits.RESIDUAL_CHECK_MAX_DIM:
            gram = self.eigenvectors.conj().T @ self.eigenvectors
            deviation = float(np.max(np.abs(gram - np.eye(eigenvalues.size))))
            if deviation > Tolerances.RECONSTRUCTION:
                raise NumericalConsistencyError(f"eigenvectors not orthonormal ({deviation:.3e})")
        eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def e_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def e_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def bandwidth(self) -> float:
        return self.e_max - self.e_min

    def ground_state(self) -> StateVector:
        return StateVector.normalized(self.n_sites, self.eigenvectors[:, 0])

    def top_state(self) -> StateVector:
        return StateVector.normalized(self.n_sites, self.eigenvectors[:, -1])


@dataclass(frozen=True)
class Histogram:
    """Bin edges plus a probability density over them"""
    edges: np.ndarray
    density: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def probabilities(self) -> np.ndarray:
        """Probability mass per bin"""
        return self.density * self.widths


@dataclass
class LevelStatistics:
    """Level-spacing ratios r_n in [0, 1] and their mean"""
    ratios: np.ndarray
    mean_r: float
    n_levels: int = 0
    n_degenerate_dropped: int = 0
    n_sectors: int = 1
    warnings: List[str] = field(default_factory=list)

    @classmethod
    def pooled(cls, stats: Sequence["LevelStatistics"]) -> "LevelStatistics":
        """Combine the ratios of several disorder samples"""
        ratios = np.concatenate([s.ratios for s in stats]) if stats else np.array([])
        warnings = []
        for s in stats:
            warnings.extend(w for w in s.warnings if w not in warnings)
        return cls(
            ratios=ratios,
            mean_r=float(ratios.mean()) if ratios.size else float("nan"),
            n_levels=sum(s.n_levels for s in stats),
            n_degenerate_dropped=sum(s.n_degenerate_dropped for s in stats),
            n_sectors=max((s.n_sectors for s in stats), default=1),
            warnings=warnings,
        )

    def histogram(self, n_bins: int = RunnerDefaults.RATIO_BINS) -> Histogram:
        density, edges = np.histogram(self.ratios, bins=n_bins, range=(0.0, 1.0), density=True)
        return Histogram(edges=edges, density=density)


def diagonalize(H: HermitianOperator) -> SpectralData:
    """
    Full dense eigendecomposition of a Hermitian operator

    Raises:
        DomainError: operator too large for the dense path
        NumericalError: eigensolver failure or residual above tolerance
    """
    if not H.hermitian:
        raise DomainError("diagonalize requires a Hermitian operator")
    if H.n_sites > Limits.MAX_DIAGONALIZATION_SITES:
        raise DomainError(
            f"{H.n_sites} sites exceed the dense limit of {Limits.MAX_DIAGONALIZATION_SITES}"
        )
    dense = H.dense()
    eigenvalues, vectors = hermitian_eigh(dense)
    if H.dim <= Limits.RESIDUAL_CHECK_MAX_DIM:
        residual = float(np.max(np.abs(dense @ vectors - vectors * eigenvalues)))
        if residual > Tolerances.EIGEN_RESIDUAL * max(H.max_abs(), 1.0):
            raise NumericalError(f"eigendecomposition residual {residual:.3e}")
    return SpectralData(eigenvalues, np.asarray(vectors, dtype=complex), H.dim, H.n_sites)


def _parity_of_indices(n_sites: int) -> np.ndarray:
    index = np.arange(2 ** n_sites)
    parity = np.zeros_like(index)
    for bit in range(n_sites):
        parity ^= (index >> bit) & 1
    return parity


def diagonalize_chain(cfg: ChainConfig, g_samples: Optional[Sequence[float]] = None,
                      resolve_sectors: bool = True) -> SpectralData:
    """
    Diagonalize the chain Hamiltonian, block by block when the y-parity is conserved

    In the frame where sigma^y is diagonal the Hamiltonian is real and only
    couples basis states of equal popcount parity. Each parity block is solved
    separately and the eigenvectors are rotated back to the computational basis.

    Args:
        cfg: Chain parameters
        g_samples: Per-site drive amplitudes in MHz
        resolve_sectors: Use the block path when the symmetry is present

    Returns:
        SpectralData in the computational basis, with sector labels on the block path
    """
    g = field_values(cfg, g_samples)
    mirrored = is_reflection_symmetric(cfg, g)
    if not (resolve_sectors and has_y_parity(cfg)):
        return replace(diagonalize(build_hamiltonian(cfg, g)), reflection_symmetric=mirrored)
    if cfg.n_sites > Limits.MAX_DIAGONALIZATION_SITES:
        raise DomainError(
            f"{cfg.n_sites} sites exceed the dense limit of {Limits.MAX_DIAGONALIZATION_SITES}"
        )

    H_y = build_hamiltonian(cfg, g, frame="y").matrix
    if H_y.nnz and float(np.max(np.abs(H_y.data.imag))) > Tolerances.SYMMETRY:
        raise NumericalConsistencyError("y-frame Hamiltonian is not real")
    parity = _parity_of_indices(cfg.n_sites)

    blocks = [np.flatnonzero(parity == p) for p in (0, 1)]
    leak = H_y[blocks[0]][:, blocks[1]]
    if leak.nnz and float(abs(leak).max()) > Tolerances.SYMMETRY:
        raise NumericalConsistencyError("parity sectors are coupled")

    dim = 2 ** cfg.n_sites
    eigenvalues = np.empty(dim)
    vectors_y = np.zeros((dim, dim))
    labels = np.empty(dim, dtype=int)
    column = 0
    for p, indices in enumerate(blocks):
        block = H_y[indices][:, indices].toarray().real
        values, vectors = hermitian_eigh(block)
        size = indices.size
        eigenvalues[column:column + size] = values
        vectors_y[indices, column:column + size] = vectors
        labels[column:column + size] = 1 - 2 * p
        column += size

    order = np.argsort(eigenvalues, kind="stable")
    vectors = rotate_from_y_frame(vectors_y[:, order], cfg.n_sites)
    logger.debug("diagonalized %d sites in two parity sectors", cfg.n_sites)
    return SpectralData(eigenvalues[order], vectors, dim, cfg.n_sites, sectors=labels[order],
                        reflection_symmetric=mirrored)


def _eigenvalues_of(spec: Union[SpectralData, Sequence[float]]) -> np.ndarray:
    if isinstance(spec, SpectralData):
        return spec.eigenvalues
    return np.sort(np.asarray(spec, dtype=float))


def normalize_energies(energies, e_min: float, e_max: float) -> np.ndarray:
    """Map energies to (E - E_min) / (E_max - E_min)"""
    width = e_max - e_min
    if width <= Tolerances.DEGENERATE_SPACING * max(abs(e_max), abs(e_min), 1.0):
        raise DegenerateSpectrumError("E_max equals E_min")
    return (np.asarray(energies, dtype=float) - e_min) / width


def normalized_energy(psi0: StateVector, spec: SpectralData, H: HermitianOperator) -> float:
    """
    Normalized energy of an initial state relative to the spectral extremes

    Raises:
        DegenerateSpectrumError: E_max equals E_min
    """
    energy = expectation(H, psi0)
    epsilon = float(normalize_energies(energy, spec.e_min, spec.e_max))
    return float(np.clip(epsilon, 0.0, 1.0))


def energy_histogram(epsilons, n_bins: int) -> Histogram:
    """Density histogram of normalized energies on [0, 1]"""
    if n_bins < 2:
        raise DomainError("n_bins must be at least 2")
    density, edges = np.histogram(np.asarray(epsilons, dtype=float), bins=n_bins,
                                  range=(0.0, 1.0), density=True)
    return Histogram(edges=edges, density=density)


def density_of_states(spec: Union[SpectralData, Sequence[float]], n_bins: int) -> Histogram:
    """
    Density of states over the normalized energy, integrating to 1

    Args:
        spec: SpectralData or a plain list of eigenvalues
        n_bins: Number of uniform bins on [0, 1]
    """
    eigenvalues = _eigenvalues_of(spec)
    epsilons = normalize_energies(eigenvalues, eigenvalues[0], eigenvalues[-1])
    return energy_histogram(epsilons, n_bins)


def _ratios_of_levels(levels: np.ndarray, trim_fraction: float):
    n = levels.size
    cut = int(np.floor(trim_fraction * n))
    kept = levels[cut:n - cut]
    if kept.size < MIN_RATIO_LEVELS:
        raise DomainError(f"only {kept.size} levels left after trimming, need {MIN_RATIO_LEVELS}")
    spacings = np.diff(kept)
    width = max(kept[-1] - kept[0], 1e-300)
    degenerate = spacings <= Tolerances.DEGENERATE_SPACING * width
    left, right = spacings[:-1], spacings[1:]
    valid = ~(degenerate[:-1] | degenerate[1:])
    ratios = np.minimum(left[valid], right[valid]) / np.maximum(left[valid], right[valid])
    return ratios, int(np.count_nonzero(~valid)), kept.size


def level_spacing_ratios(spec: Union[SpectralData, Sequence[float]],
                         trim_fraction: float = RunnerDefaults.TRIM_FRACTION) -> LevelStatistics:
    """
    Adjacent-gap ratios r_n = min(s_n, s_n-1) / max(s_n, s_n-1)

    trim_fraction of the levels is discarded at each spectral edge. When the
    spectrum carries sector labels the ratios are computed per sector and pooled.
    Ratios touching an exactly degenerate spacing are dropped and counted. A
    mirror-symmetric chain (W = 0 with uniform couplings) gets a warning attached.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise DomainError("trim_fraction must lie in [0, 0.5)")
    if isinstance(spec, SpectralData) and spec.sectors is not None:
        groups = [spec.eigenvalues[spec.sectors == label] for label in np.unique(spec.sectors)]
    else:
        groups = [_eigenvalues_of(spec)]

    pieces, dropped, n_levels = [], 0, 0
    for levels in groups:
        ratios, n_dropped, kept = _ratios_of_levels(np.sort(levels), trim_fraction)
        pieces.append(ratios)
        dropped += n_dropped
        n_levels += kept
    ratios = np.concatenate(pieces)
    if dropped:
        logger.debug("dropped %d ratios at degenerate spacings", dropped)
    warnings = []
    if isinstance(spec, SpectralData) and spec.reflection_symmetric:
        warnings.append(REFLECTION_WARNING)
        logger.debug(REFLECTION_WARNING)
    return LevelStatistics(
        ratios=ratios,
        mean_r=float(ratios.mean()) if ratios.size else float("nan"),
        n_levels=n_levels,
        n_degenerate_dropped=dropped,
        n_sectors=len(groups),
        warnings=warnings,
    )


def goe_pdf(r):
    """Surmise P(r) = (27/4)(r + r^2) / (1 + r + r^2)^(5/2) for r >= 0"""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("goe_pdf is defined for r >= 0")
    value = 6.75 * (r + r ** 2) / (1 + r + r ** 2) ** 2.5
    return float(value) if value.ndim == 0 else value


def goe_pdf_folded(r):
    """Density 2 P(r) of min(r, 1/r) on [0, 1]"""
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise DomainError("the folded surmise is defined on [0, 1]")
    value = 2.0 * np.asarray(goe_pdf(r))
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=None)
def goe_mean_r() -> float:
    """Mean of the folded surmise by quadrature"""
    value, _ = integrate.quad(lambda r: r * goe_pdf_folded(r), 0.0, 1.0, epsabs=1e-12)
    return float(value)


def goe_bin_density(edges) -> np.ndarray:
    """Bin-averaged folded surmise density"""
    edges = np.asarray(edges, dtype=float)
    masses = [integrate.quad(goe_pdf_folded, lo, hi, epsabs=1e-12)[0]
              for lo, hi in zip(edges[:-1], edges[1:])]
    return np.asarray(masses) / np.diff(edges)


def goe_total_variation(histogram: Histogram) -> float:
    """Total-variation distance between an r-histogram and the folded surmise"""
    goe_mass = goe_bin_density(histogram.edges) * histogram.widths
    return MetricsCalculator.total_variation_distance(histogram.probabilities(), goe_mass)


def free_fermion_spectrum(cfg: ChainConfig) -> np.ndarray:
    """
    Single-particle energies 4 lambda cos(pi n / (N + 1)) of the open XX chain

    Raises:
        DomainError: drive, potential or non-uniform couplings present
    """
    if cfg.field_g_mean != 0 or cfg.field_disorder_W != 0:
        raise DomainError("the free-fermion spectrum needs g = 0")
    if any(cfg.potential_mu):
        raise DomainError("the free-fermion spectrum needs mu = 0")
    if not cfg.is_uniform:
        raise DomainError("the free-fermion spectrum needs uniform couplings")
    n = cfg.n_sites
    if n == 1:
        return np.zeros(1)
    lam = float(cfg.lambdas()[0])
    modes = np.arange(1, n + 1)
    return 4.0 * lam * np.cos(np.pi * modes / (n + 1))


def many_body_energies(single_particle: Sequence[float]) -> np.ndarray:
    """All 2^N subset sums of the single-particle energies, sorted"""
    energies = np.zeros(1)
    for energy in single_particle:
        energies = np.concatenate([energies, energies + energy])
    return np.sort(energies)
