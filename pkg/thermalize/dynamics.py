"""
Time evolution
Spectral propagation of quenches, the dense Lindblad integrator and the
Monte Carlo wavefunction unraveling of the same master equation
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import sparse
from scipy.integrate import solve_ivp

from .config import ChainDefaults, Limits, Tolerances
from .evaluation.evaluator import BatchEvaluator
from .evaluation.metrics import MetricsCalculator
from .observables import LocalMarginals
from .qcore import DensityMatrix, HermitianOperator, StateVector, pauli_string
from .spectra import SpectralData
from .utils.errors import DomainError, IntegrationError

logger = logging.getLogger(__name__)

Reducer = Callable[[np.ndarray], float]
PerSite = Optional[Union[float, List[float]]]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Sorted, deduplicated evolution times in ns, starting at 0"""
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if times.size == 0:
            raise DomainError("time grid is empty")
        if np.any(np.diff(times) < 0):
            raise DomainError("time grid must be non-decreasing")
        times = np.unique(times)
        if times[0] != 0.0:
            raise DomainError(f"time grid must start at 0, starts at {times[0]}")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, t_max: float, n_points: int) -> "TimeGrid":
        if t_max <= 0 or n_points < 2:
            raise DomainError("uniform grid needs t_max > 0 and at least two points")
        return cls(np.linspace(0.0, t_max, n_points))

    def __len__(self) -> int:
        return self.times.size

    @property
    def t_max(self) -> float:
        return float(self.times[-1])


class DecoherenceParams(BaseModel):
    """
    T1 and T2 in ns, scalar or per site

    None switches the channel off; math.inf is accepted as well.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    T1: PerSite = ChainDefaults.T1_NS
    T2: PerSite = ChainDefaults.T2_NS

    @field_validator("T1", "T2")
    @classmethod
    def _positive(cls, value):
        values = value if isinstance(value, list) else [value]
        if value is not None and any(v is None or v <= 0 for v in values):
            raise ValueError("decoherence times must be positive")
        return value

    @classmethod
    def device(cls) -> "DecoherenceParams":
        """Per-site device values"""
        return cls(T1=[t * 1e3 for t in ChainDefaults.DEVICE_T1_US],
                   T2=[t * 1e3 for t in ChainDefaults.DEVICE_T2_US])

    def per_site(self, n_sites: int) -> Tuple[np.ndarray, np.ndarray]:
        """(T1, T2) arrays of length n_sites; inf where a channel is off"""
        return self._expand(self.T1, n_sites, "T1"), self._expand(self.T2, n_sites, "T2")

    @staticmethod
    def _expand(value: PerSite, n_sites: int, name: str) -> np.ndarray:
        if value is None:
            return np.full(n_sites, np.inf)
        if isinstance(value, list):
            if len(value) != n_sites:
                raise DomainError(f"{name} has {len(value)} entries for {n_sites} sites")
            return np.asarray(value, dtype=float)
        return np.full(n_sites, float(value))

    def warnings(self, n_sites: int) -> List[str]:
        """Sites where T2 > 2 T1, which no pure-dephasing split can produce"""
        t1, t2 = self.per_site(n_sites)
        bad = [j + 1 for j in range(n_sites) if t2[j] > 2 * t1[j]]
        if not bad:
            return []
        return [f"T2 > 2 T1 on sites {bad}; the dephasing channel is applied as given"]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observable records on a time grid, plus optional state snapshots"""
    grid: TimeGrid
    records: Dict[str, np.ndarray]
    snapshots: Optional[List[Union[StateVector, DensityMatrix]]] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        records = {}
        for key, values in self.records.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (len(self.grid),):
                raise DomainError(f"record {key!r} has {values.size} values for {len(self.grid)} times")
            records[key] = values
        if self.snapshots is not None and len(self.snapshots) != len(self.grid):
            raise DomainError("one snapshot per grid time is required")
        object.__setattr__(self, "records", records)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def keys(self) -> List[str]:
        return list(self.records)

    def column(self, key: str) -> np.ndarray:
        try:
            return self.records[key]
        except KeyError:
            raise DomainError(f"no record named {key!r}") from None


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """
    Monte Carlo wavefunction ensemble

    values[name] has shape (n_trajectories, n_times) for every reducer;
    singles / pairs hold per-trajectory local marginals when requested.
    """
    grid: TimeGrid
    values: Dict[str, np.ndarray]
    jump_counts: np.ndarray
    singles: Optional[np.ndarray] = None
    pairs: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None

    @property
    def n_trajectories(self) -> int:
        return int(self.jump_counts.size)

    def mean(self, key: str) -> np.ndarray:
        return MetricsCalculator.mean_and_stderr(self.values[key])[0]

    def stderr(self, key: str) -> np.ndarray:
        return MetricsCalculator.mean_and_stderr(self.values[key])[1]

    def as_trajectory(self) -> Trajectory:
        records = {}
        for key in self.values:
            mean, err = MetricsCalculator.mean_and_stderr(self.values[key])
            records[key] = mean
            records[f"{key}_stderr"] = err
        return Trajectory(self.grid, records, metadata={"n_trajectories": self.n_trajectories})

    def density_matrices(self) -> List[DensityMatrix]:
        if self.density is None:
            raise DomainError("the ensemble was run without density matrices")
        n_sites = int(round(math.log2(self.density.shape[1])))
        return [DensityMatrix(n_sites, 0.5 * (rho + rho.conj().T)) for rho in self.density]

    def marginals(self, trajectories: Optional[np.ndarray] = None) -> List[LocalMarginals]:
        """Ensemble-averaged local marginals per time (optionally over a subset)"""
        if self.singles is None:
            raise DomainError("the ensemble was run without local marginals")
        index = slice(None) if trajectories is None else trajectories
        singles = self.singles[index].mean(axis=0)
        pairs = self.pairs[index].mean(axis=0)
        n_sites = singles.shape[1]
        return [LocalMarginals(n_sites, singles[k], pairs[k]) for k in range(len(self.grid))]

    def marginal_statistic(self, statistic: Callable[[LocalMarginals], float],
                           n_batches: int = 10) -> Tuple[np.ndarray, np.ndarray]:
        """
        A nonlinear function of the averaged marginals, with a batch-means error

        Returns:
            (value from the full ensemble, standard error over n_batches batches)
        """
        full = np.array([statistic(m) for m in self.marginals()])
        n_batches = min(n_batches, self.n_trajectories)
        if n_batches < 2:
            return full, np.zeros_like(full)
        batches = np.array_split(np.arange(self.n_trajectories), n_batches)
        per_batch = np.array([[statistic(m) for m in self.marginals(b)] for b in batches])
        return full, MetricsCalculator.mean_and_stderr(per_batch)[1]


def propagate(spec: SpectralData, initial: np.ndarray, times: Sequence[float]) -> Iterator[np.ndarray]:
    """
    Yield V exp(-i Lambda t) V^dagger applied to the initial column(s) at each time

    Args:
        spec: Eigendecomposition of H
        initial: State vector (D,) or batch of states (D, S)
        times: Evolution times in ns
    """
    coefficients = spec.eigenvectors.conj().T @ initial
    for t in times:
        phases = np.exp(-1j * spec.eigenvalues * t)
        if coefficients.ndim == 1:
            yield spec.eigenvectors @ (phases * coefficients)
        else:
            yield spec.eigenvectors @ (phases[:, None] * coefficients)


def evolve_unitary(spec: SpectralData, psi0: StateVector, grid: TimeGrid) -> List[StateVector]:
    """psi(t) = V exp(-i Lambda t) V^dagger psi0 for every grid time"""
    if psi0.dim != spec.source_dim:
        raise DomainError(f"state of dimension {psi0.dim} for a spectrum of dimension {spec.source_dim}")
    states = []
    for t, amplitudes in zip(grid.times, propagate(spec, psi0.amplitudes, grid.times)):
        if t == 0.0:
            states.append(psi0)
        else:
            states.append(StateVector(psi0.n_sites, amplitudes))
    return states


def lindblad_operators(n_sites: int, dec: DecoherenceParams) -> List[HermitianOperator]:
    """Jump operators s-_j / sqrt(T1_j) and Z_j / sqrt(2 T2_j); channels with infinite times are left out"""
    t1, t2 = dec.per_site(n_sites)
    operators = []
    for site in range(1, n_sites + 1):
        if np.isfinite(t1[site - 1]):
            operators.append(pauli_string(n_sites, [(site, "-")]) * (1.0 / math.sqrt(t1[site - 1])))
        if np.isfinite(t2[site - 1]):
            operators.append(pauli_string(n_sites, [(site, "z")]) * (1.0 / math.sqrt(2.0 * t2[site - 1])))
    return operators


def evolve_lindblad_dense(H: HermitianOperator, rho0: DensityMatrix, grid: TimeGrid,
                          dec: DecoherenceParams) -> List[DensityMatrix]:
    """
    Integrate d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho} / 2)

    Adaptive DOP853 on the full density matrix, limited to DENSE_LINDBLAD_MAX_SITES.

    Raises:
        DomainError: too many sites or dimension mismatch
        IntegrationError: the integrator failed
    """
    if H.n_sites > Limits.DENSE_LINDBLAD_MAX_SITES:
        raise DomainError(
            f"{H.n_sites} sites exceed the dense Lindblad limit of {Limits.DENSE_LINDBLAD_MAX_SITES}"
        )
    if rho0.dim != H.dim:
        raise DomainError(f"state of dimension {rho0.dim} for an operator of dimension {H.dim}")
    for warning in dec.warnings(H.n_sites):
        logger.warning(warning)

    dim = H.dim
    h = H.dense()
    jumps = [op.dense() for op in lindblad_operators(H.n_sites, dec)]
    L = np.array(jumps) if jumps else np.zeros((0, dim, dim), dtype=complex)
    L_dagger = L.conj().transpose(0, 2, 1)
    L_squared = (L_dagger @ L).sum(axis=0) if jumps else np.zeros((dim, dim), dtype=complex)

    def _lindblad_rhs(t, y):
        rho = y.reshape(dim, dim)
        rho_dot = -1j * (h @ rho - rho @ h)
        if jumps:
            rho_dot += np.sum(L @ rho @ L_dagger, axis=0) - 0.5 * (L_squared @ rho + rho @ L_squared)
        return rho_dot.ravel()

    times = grid.times
    if len(times) == 1:
        return [rho0]
    solution = solve_ivp(
        _lindblad_rhs,
        t_span=(0.0, float(times[-1])),
        y0=np.array(rho0.elements, dtype=complex).ravel(),
        t_eval=times,
        method="DOP853",
        atol=Tolerances.LINDBLAD_ATOL,
        rtol=Tolerances.LINDBLAD_RTOL,
    )
    if not solution.success:
        raise IntegrationError(f"Lindblad integration failed: {solution.message}")

    states = []
    for column in solution.y.T:
        rho = column.reshape(dim, dim)
        states.append(DensityMatrix(H.n_sites, 0.5 * (rho + rho.conj().T)))
    return states


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    """Independent random stream of trajectory number index"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x7A1, index])))


class _Unraveling:
    """Shared, read-only data of a trajectory ensemble"""

    def __init__(self, H: Union[HermitianOperator, SpectralData], n_sites: int, dec: DecoherenceParams,
                 times: np.ndarray, reducers: Dict[str, Reducer], keep_marginals: bool, keep_density: bool):
        if isinstance(H, SpectralData):
            vectors = H.eigenvectors
            h = (vectors * H.eigenvalues) @ vectors.conj().T
        else:
            h = H.matrix
        self.jumps = [op.sparse() for op in lindblad_operators(n_sites, dec)]
        damping = sum((op.conj().T @ op for op in self.jumps), sparse.csr_matrix(h.shape, dtype=complex))
        if sparse.issparse(h):
            self.h_eff = sparse.csr_matrix(h - 0.5j * damping)
        else:
            self.h_eff = np.asarray(h) - 0.5j * damping.toarray()
        self.n_sites = n_sites
        self.times = times
        self.reducers = reducers
        self.keep_marginals = keep_marginals
        self.keep_density = keep_density

    def rhs(self, t, y):
        return -1j * (self.h_eff @ y)


def _run_single_trajectory(model: _Unraveling, psi0: np.ndarray, seed: int, index: int) -> Dict:
    rng = trajectory_generator(seed, index)
    times = model.times
    n_times = len(times)
    values = np.empty((len(model.reducers), n_times))
    singles = np.empty((n_times, model.n_sites, 2, 2), dtype=complex) if model.keep_marginals else None
    pairs = np.empty((n_times, max(model.n_sites - 1, 0), 4, 4), dtype=complex) if model.keep_marginals else None
    density = np.zeros((n_times,) + (psi0.size,) * 2, dtype=complex) if model.keep_density else None

    def observe(k: int, y: np.ndarray):
        psi = y / np.linalg.norm(y)
        for r, reducer in enumerate(model.reducers.values()):
            values[r, k] = reducer(psi)
        if model.keep_marginals:
            marginals = LocalMarginals.from_state(psi, model.n_sites)
            singles[k] = marginals.singles
            pairs[k] = marginals.pairs
        if model.keep_density:
            density[k] = np.outer(psi, psi.conj())

    psi = np.array(psi0, dtype=complex)
    t, k, n_jumps = 0.0, 0, 0
    threshold = rng.random()

    def norm_event(_t, y):
        return float(np.vdot(y, y).real) - threshold
    norm_event.terminal = True
    norm_event.direction = -1

    while k < n_times:
        if times[k] <= t:
            observe(k, psi)
            k += 1
            continue
        solution = solve_ivp(
            model.rhs,
            t_span=(t, float(times[-1])),
            y0=psi,
            t_eval=times[k:],
            method="DOP853",
            events=norm_event if model.jumps else None,
            atol=Tolerances.TRAJECTORY_ATOL,
            rtol=Tolerances.TRAJECTORY_RTOL,
        )
        if solution.status == -1:
            raise IntegrationError(f"trajectory {index} failed: {solution.message}")
        for column in np.transpose(solution.y):
            observe(k, column)
            k += 1
        if solution.status != 1:
            break

        # jump at the first crossing of the norm threshold
        t = float(solution.t_events[0][0])
        psi = solution.y_events[0][0]
        candidates = [op @ psi for op in model.jumps]
        weights = np.array([np.vdot(c, c).real for c in candidates])
        channel = rng.choice(len(candidates), p=weights / weights.sum())
        psi = candidates[channel] / math.sqrt(weights[channel])
        n_jumps += 1
        threshold = rng.random()

    return {"values": values, "singles": singles, "pairs": pairs, "density": density, "jumps": n_jumps}


def evolve_lindblad_trajectories(
    H: Union[HermitianOperator, SpectralData],
    psi0: StateVector,
    grid: TimeGrid,
    dec: DecoherenceParams,
    n_traj: int,
    seed: int = 0,
    reducers: Optional[Dict[str, Reducer]] = None,
    keep_marginals: bool = False,
    keep_density: bool = False,
    max_workers: int = 1,
) -> TrajectoryEnsemble:
    """
    Monte Carlo wavefunction unraveling of the Lindblad equation

    Each trajectory evolves under H_eff = H - (i/2) sum_k L_k^dag L_k until the
    squared norm falls below a uniform random threshold, then applies the jump
    L_k chosen with probability proportional to ||L_k psi||^2.

    Args:
        H: Hamiltonian, or its eigendecomposition
        psi0: Initial pure state
        grid: Output times
        dec: Decoherence times
        n_traj: Number of trajectories
        seed: Root seed; trajectory i uses its own substream
        reducers: name -> linear functional of the normalized state (e.g. an expectation value)
        keep_marginals: Store one- and two-site marginals per trajectory and time
        keep_density: Average full density matrices (small chains only)
        max_workers: Threads used for independent trajectories

    Returns:
        TrajectoryEnsemble
    """
    if n_traj < 1:
        raise DomainError("n_traj must be positive")
    n_sites = psi0.n_sites
    if keep_density and n_sites > Limits.DENSE_LINDBLAD_MAX_SITES:
        raise DomainError("density matrices are only kept for small chains")
    for warning in dec.warnings(n_sites):
        logger.warning(warning)

    reducers = dict(reducers or {})
    model = _Unraveling(H, n_sites, dec, grid.times, reducers, keep_marginals, keep_density)
    evaluator = BatchEvaluator(max_workers=max_workers, description="trajectories")
    results = evaluator.run(
        ((i, i) for i in range(n_traj)),
        lambda i: _run_single_trajectory(model, psi0.amplitudes, seed, i),
    )
    ordered = [results[i] for i in range(n_traj)]

    values = {name: np.array([r["values"][j] for r in ordered]) for j, name in enumerate(reducers)}
    jump_counts = np.array([r["jumps"] for r in ordered])
    logger.debug("%d trajectories, mean jump count %.2f", n_traj, jump_counts.mean())
    return TrajectoryEnsemble(
        grid=grid,
        values=values,
        jump_counts=jump_counts,
        singles=np.array([r["singles"] for r in ordered]) if keep_marginals else None,
        pairs=np.array([r["pairs"] for r in ordered]) if keep_marginals else None,
        density=np.mean([r["density"] for r in ordered], axis=0) if keep_density else None,
    )


def expectation_reducer(op: HermitianOperator) -> Reducer:
    """Reducer psi -> <psi|op|psi> for a Hermitian operator"""
    matrix = op.matrix

    def reducer(psi: np.ndarray) -> float:
        return float(np.vdot(psi, matrix @ psi).real)
    return reducer


def sigma_z_reducer(n_sites: int) -> Reducer:
    """Reducer for the site-averaged sigma^z"""
    signs = np.zeros(2 ** n_sites)
    index = np.arange(2 ** n_sites)
    for bit in range(n_sites):
        signs += 1 - 2 * ((index >> bit) & 1)
    signs /= n_sites

    def reducer(psi: np.ndarray) -> float:
        return float(np.dot(signs, np.abs(psi) ** 2))
    return reducer

