"""
Experiment Runner
Named scenarios over disorder ensembles, and CSV / JSON emission of their result tables
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__, config
from .config import Limits, RunnerDefaults, Tolerances
from .context_manager import RunContext
from .dynamics import (
    DecoherenceParams,
    TimeGrid,
    Trajectory,
    evolve_lindblad_dense,
    evolve_lindblad_trajectories,
    propagate,
)
from .evaluation.evaluator import BatchEvaluator
from .evaluation.metrics import MetricsCalculator
from .hamiltonian import ChainConfig, build_hamiltonian, hamiltonian_terms, has_y_parity, sample_disorder
from .initial import PRESET_STATES, BlochAngles, coherent_energy, preset_state, spin_coherent
from .observables import LocalMarginals, batch_site_averaged_entropy, page_value, time_average
from .spectra import (
    Histogram,
    LevelStatistics,
    density_of_states,
    diagonalize_chain,
    goe_bin_density,
    goe_mean_r,
    goe_total_variation,
    level_spacing_ratios,
    normalize_energies,
)
from .thermal import EigenstateMarginals, effective_beta, solve_beta, thermal_concurrence_curve
from .utils.errors import DomainError, OutputError, UnreachableTemperatureError

logger = logging.getLogger(__name__)

# Jbeta of the |pi/2, pi/4> state at default parameters, read off the thermal curve
REFERENCE_JBETA = -1.034

CONVENTIONS = {
    "units": "inputs in MHz (ordinary frequency); energies in rad/ns; times in ns",
    "basis": "site 1 is the most significant bit; bit 0 is |+Z>, bit 1 is |-Z> (excited)",
    "drive": "sum_j g_j (cos(phi) X_j - sin(phi) Y_j)",
    "initial_state": "cos(theta0/2)|+Z> + exp(-i phi0) sin(theta0/2)|-Z> on every site",
    "jbeta": "beta times the mean coupling J in rad/ns",
}


class Scenario(str, Enum):
    """Named experiment scenarios"""
    QUENCH = "quench"
    SWEEP = "sweep"
    SPECTRUM_STATS = "spectrum-stats"
    THERMAL_CURVE = "thermal-curve"
    LINDBLAD_QUENCH = "lindblad-quench"
    BETA_SOLVE = "beta-solve"


def _sigma_z(marginals: LocalMarginals, references) -> float:
    return marginals.mean_sigma_z()


def _entropy(marginals: LocalMarginals, references) -> float:
    return marginals.mean_entropy()


def _concurrence(marginals: LocalMarginals, references) -> float:
    return marginals.mean_concurrence()


def _trace_distance(marginals: LocalMarginals, references) -> float:
    return marginals.mean_trace_distance(references)


# Site-averaged observables a quench can record
OBSERVABLES: Dict[str, Callable[[LocalMarginals, Optional[Sequence[np.ndarray]]], float]] = {
    "sigma_z_mean": _sigma_z,
    "entropy_mean": _entropy,
    "concurrence_mean": _concurrence,
    "trace_distance_mean": _trace_distance,
}
PAIR_OBSERVABLES = {"concurrence_mean", "trace_distance_mean"}


class AngleGrid(BaseModel):
    """(theta0, phi0) grid: explicit value lists, or inclusive uniform grids on [0, pi] x [0, 2 pi]"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    theta0: Optional[List[float]] = None
    phi0: Optional[List[float]] = None
    n_theta: int = Field(default=RunnerDefaults.SWEEP_THETA_POINTS, ge=1)
    n_phi: int = Field(default=RunnerDefaults.SWEEP_PHI_POINTS, ge=1)

    @field_validator("theta0")
    @classmethod
    def _theta_range(cls, value):
        if value is not None and any(not 0.0 <= t <= math.pi for t in value):
            raise ValueError("theta0 values must lie in [0, pi]")
        return value

    def thetas(self) -> np.ndarray:
        if self.theta0 is not None:
            return np.asarray(self.theta0, dtype=float)
        return np.linspace(0.0, math.pi, self.n_theta)

    def phis(self) -> np.ndarray:
        if self.phi0 is not None:
            return np.asarray(self.phi0, dtype=float)
        return np.linspace(0.0, 2 * math.pi, self.n_phi)

    def points(self) -> List[Tuple[float, float]]:
        """Grid points, theta-major"""
        return [(float(t), float(p)) for t in self.thetas() for p in self.phis()]


class GridSpec(BaseModel):
    """Uniform time grid specification"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_max: float = Field(default=RunnerDefaults.T_MAX_NS, gt=0.0)
    n_points: int = Field(default=RunnerDefaults.N_TIME_POINTS, ge=2)

    def build(self) -> TimeGrid:
        return TimeGrid.uniform(self.t_max, self.n_points)


class ExperimentConfig(BaseModel):
    """
    Validated configuration of one scenario run

    The top-level seed drives every random stream and is copied into chain.seed.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Scenario
    chain: ChainConfig = Field(default_factory=ChainConfig)
    initial: Optional[BlochAngles] = None
    initial_preset: Optional[str] = None
    angle_grid: Optional[AngleGrid] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    decoherence: Optional[DecoherenceParams] = None
    n_disorder_samples: int = Field(default=RunnerDefaults.N_DISORDER_SAMPLES, ge=1)
    observables: List[str] = Field(default_factory=lambda: ["sigma_z_mean", "entropy_mean"])
    output_dir: str = config.DEFAULT_OUTPUT_DIR
    seed: int = Field(default=0, ge=0)
    jbeta: Optional[List[float]] = None
    average_window: Tuple[float, float] = RunnerDefaults.AVERAGE_WINDOW_NS
    dos_bins: int = Field(default=RunnerDefaults.DOS_BINS, ge=2)
    ratio_bins: int = Field(default=RunnerDefaults.RATIO_BINS, ge=2)
    trim_fraction: float = Field(default=RunnerDefaults.TRIM_FRACTION, ge=0.0, lt=0.5)
    n_trajectories: int = Field(default=RunnerDefaults.N_TRAJECTORIES, ge=1)
    resolve_sectors: bool = True
    lindblad_method: Literal["auto", "dense", "trajectories"] = "auto"

    @model_validator(mode="before")
    @classmethod
    def _share_seed(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        chain = data.get("chain") or {}
        chain = chain.model_dump() if isinstance(chain, ChainConfig) else dict(chain)
        if "seed" in data:
            chain["seed"] = data["seed"]
        elif "seed" in chain:
            data["seed"] = chain["seed"]
        data["chain"] = chain
        if data.get("scenario") in (Scenario.LINDBLAD_QUENCH, Scenario.LINDBLAD_QUENCH.value) \
                and data.get("decoherence") is None:
            data["decoherence"] = {}
        return data

    @model_validator(mode="after")
    def _check_scenario(self):
        scenario = self.scenario
        n_sites = self.chain.n_sites
        if n_sites > Limits.MAX_DIAGONALIZATION_SITES:
            raise ValueError(f"n_sites = {n_sites} exceeds the limit of {Limits.MAX_DIAGONALIZATION_SITES}")
        if self.initial is not None and self.initial_preset is not None:
            raise ValueError("give either initial or initial_preset, not both")
        if self.initial_preset is not None and self.initial_preset not in PRESET_STATES:
            raise ValueError(f"unknown initial_preset {self.initial_preset!r}; choose from {sorted(PRESET_STATES)}")
        has_state = self.initial is not None or self.initial_preset is not None

        if scenario in (Scenario.QUENCH, Scenario.LINDBLAD_QUENCH):
            if not has_state:
                raise ValueError(f"scenario {scenario.value} needs initial or initial_preset")
            if not self.observables:
                raise ValueError("at least one observable is required")
            unknown = [name for name in self.observables if name not in OBSERVABLES]
            if unknown:
                raise ValueError(f"unknown observables {unknown}; choose from {sorted(OBSERVABLES)}")
            if len(set(self.observables)) != len(self.observables):
                raise ValueError("observables must not repeat")
            if n_sites < 2 and PAIR_OBSERVABLES.intersection(self.observables):
                raise ValueError("pair observables need at least two sites")
        if scenario == Scenario.LINDBLAD_QUENCH:
            if self.lindblad_method == "dense" and n_sites > Limits.DENSE_LINDBLAD_MAX_SITES:
                raise ValueError(
                    f"dense Lindblad integration is limited to {Limits.DENSE_LINDBLAD_MAX_SITES} sites"
                )
            self.decoherence.per_site(n_sites)
        if scenario == Scenario.SWEEP:
            if self.angle_grid is None:
                raise ValueError("scenario sweep needs angle_grid")
            lo, hi = self.average_window
            if not 0.0 <= lo < hi <= self.grid.t_max:
                raise ValueError(f"average_window {self.average_window} must lie inside [0, {self.grid.t_max}]")
            times = self.grid.build().times
            if np.count_nonzero((times >= lo) & (times <= hi)) < 2:
                raise ValueError("average_window holds fewer than two grid points")
        if scenario == Scenario.BETA_SOLVE and not (has_state or self.angle_grid is not None):
            raise ValueError("scenario beta-solve needs an initial state or angle_grid")
        if scenario == Scenario.THERMAL_CURVE:
            if n_sites < 2:
                raise ValueError("the thermal concurrence curve needs at least two sites")
            if self.jbeta is not None and (not self.jbeta or not all(map(math.isfinite, self.jbeta))):
                raise ValueError("jbeta must be a non-empty list of finite values")
        if scenario in (Scenario.SPECTRUM_STATS, Scenario.BETA_SOLVE) and n_sites < 2:
            raise ValueError(f"scenario {scenario.value} needs at least two sites")
        return self

    def initial_state(self) -> BlochAngles:
        if self.initial is not None:
            return self.initial
        if self.initial_preset is not None:
            return preset_state(self.initial_preset)
        raise DomainError("no initial state configured")

    def angle_points(self) -> List[Tuple[float, float]]:
        """Angle grid points, or the single configured initial state"""
        if self.angle_grid is not None:
            return self.angle_grid.points()
        angles = self.initial_state()
        return [(angles.theta0, angles.phi0)]

    def jbeta_grid(self) -> np.ndarray:
        if self.jbeta is not None:
            return np.asarray(self.jbeta, dtype=float)
        return np.linspace(RunnerDefaults.JBETA_MIN, RunnerDefaults.JBETA_MAX, RunnerDefaults.JBETA_POINTS)


@dataclass
class ResultTable:
    """Named columns of equal length, metadata, and optional companion tables"""
    name: str
    columns: Dict[str, np.ndarray]
    metadata: Dict = field(default_factory=dict)
    companions: Dict[str, "ResultTable"] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {key: len(values) for key, values in self.columns.items()}
        if len(set(lengths.values())) > 1:
            raise DomainError(f"columns of unequal length: {lengths}")

    @property
    def n_rows(self) -> int:
        return next(iter(len(v) for v in self.columns.values()), 0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({key: np.asarray(values) for key, values in self.columns.items()})


def config_hash(cfg: ExperimentConfig) -> str:
    """Short content hash of the configuration, independent of the output directory"""
    document = cfg.model_dump(mode="json", exclude={"output_dir"})
    signature = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.md5(signature.encode()).hexdigest()[:12]


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _metadata(cfg: ExperimentConfig, ctx: RunContext, headline: Dict, provenance: Dict) -> Dict:
    return _jsonable({
        "artifact_version": config.ARTIFACT_VERSION,
        "package_version": __version__,
        "scenario": cfg.scenario.value,
        "config": cfg.model_dump(mode="json"),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "conventions": CONVENTIONS,
        "provenance": provenance,
        "run": ctx.export_to_dict(),
        "headline": headline,
        "warnings": sorted(ctx.warnings),
    })


def _disorder_items(cfg: ExperimentConfig) -> List[Tuple[int, Tuple[int, np.ndarray]]]:
    fields = sample_disorder(cfg.chain, cfg.n_disorder_samples)
    return [(index, (index, g)) for index, g in enumerate(fields)]


def _evaluate_samples(cfg: ExperimentConfig, ctx: RunContext, fn, max_workers: Optional[int],
                      show_progress: bool, skip_on=()) -> Dict[int, Dict]:
    """Run fn over the disorder samples; skipped samples are recorded in the context"""
    evaluator = BatchEvaluator(max_workers=max_workers, show_progress=show_progress,
                               description="disorder samples", skip_on=skip_on)
    results = evaluator.run(_disorder_items(cfg), fn)
    for index, reason in sorted(evaluator.skipped.items()):
        ctx.skip_sample(index, reason)
    if not results:
        raise UnreachableTemperatureError(f"all {cfg.n_disorder_samples} disorder samples were skipped")
    if cfg.chain.field_disorder_W == 0 and cfg.n_disorder_samples > 1:
        ctx.warn("W = 0: every disorder sample is identical")
    return results


def _stack(results: Dict[int, Dict], key: str) -> np.ndarray:
    return np.array([result[key] for result in results.values()])


def _thermal_references(cfg: ExperimentConfig, spec, H, psi0, ctx: RunContext, index: int):
    """Thermal pair marginals at the effective temperature of psi0"""
    temperature = effective_beta(psi0, spec, H, coupling_scale=cfg.chain.mean_J_angular)
    ctx.record("effective_beta", "solve", index, jbeta=temperature.beta_dimensionless)
    return EigenstateMarginals(spec).thermal_pairs(temperature.beta)


def _record_state(names: Sequence[str], marginals: LocalMarginals, references) -> List[float]:
    return [OBSERVABLES[name](marginals, references) for name in names]


def _closed_observables(cfg: ExperimentConfig, spec, psi0, grid: TimeGrid, references) -> np.ndarray:
    """(n_observables, n_times) records of the unitary quench"""
    n_sites = cfg.chain.n_sites
    rows = []
    for t, amplitudes in zip(grid.times, propagate(spec, psi0.amplitudes, grid.times)):
        if t == 0.0:
            amplitudes = psi0.amplitudes
        marginals = LocalMarginals.from_state(amplitudes, n_sites)
        rows.append(_record_state(cfg.observables, marginals, references))
    return np.array(rows).T


def _open_observables(cfg: ExperimentConfig, H, psi0, grid: TimeGrid, references,
                      index: int, ctx: RunContext) -> Tuple[np.ndarray, np.ndarray]:
    """(values, trajectory errors) of the decohered quench, each (n_observables, n_times)"""
    dec = cfg.decoherence
    n_sites = cfg.chain.n_sites
    dense = cfg.lindblad_method == "dense" or (
        cfg.lindblad_method == "auto" and n_sites <= Limits.DENSE_LINDBLAD_MAX_SITES
    )
    if dense:
        states = evolve_lindblad_dense(H, psi0.density_matrix(), grid, dec)
        ctx.record("lindblad_dense", "evolve", index, n_times=len(grid))
        rows = [_record_state(cfg.observables, LocalMarginals.from_state(rho), references) for rho in states]
        values = np.array(rows).T
        return values, np.zeros_like(values)

    trajectory_seed = int(np.random.SeedSequence([cfg.seed, index]).generate_state(1)[0])
    ensemble = evolve_lindblad_trajectories(
        H, psi0, grid, dec, cfg.n_trajectories, seed=trajectory_seed, keep_marginals=True,
    )
    ctx.record("lindblad_trajectories", "evolve", index,
               n_trajectories=cfg.n_trajectories, mean_jumps=float(ensemble.jump_counts.mean()))
    values, errors = [], []
    for name in cfg.observables:
        value, error = ensemble.marginal_statistic(lambda m, name=name: OBSERVABLES[name](m, references))
        values.append(value)
        errors.append(error)
    return np.array(values), np.array(errors)


def run_quench(cfg: ExperimentConfig, max_workers: Optional[int] = None,
               show_progress: bool = False) -> ResultTable:
    """
    Disorder-averaged quench from a spin-coherent state

    Scenario lindblad-quench adds the decohered evolution; the closed-system
    curves are then emitted as <observable>_unitary columns.
    """
    if cfg.scenario not in (Scenario.QUENCH, Scenario.LINDBLAD_QUENCH):
        raise DomainError(f"run_quench cannot run scenario {cfg.scenario.value}")
    open_system = cfg.scenario == Scenario.LINDBLAD_QUENCH
    ctx = RunContext(cfg.scenario.value)
    grid = cfg.grid.build()
    angles = cfg.initial_state()
    psi0 = spin_coherent(angles, cfg.chain.n_sites)
    needs_temperature = "trace_distance_mean" in cfg.observables
    if open_system:
        for warning in cfg.decoherence.warnings(cfg.chain.n_sites):
            ctx.warn(warning)

    def sample(payload):
        index, g = payload
        spec = diagonalize_chain(cfg.chain, g, resolve_sectors=cfg.resolve_sectors)
        ctx.record("diagonalize", "diagonalize", index)
        H = build_hamiltonian(cfg.chain, g)
        references = _thermal_references(cfg, spec, H, psi0, ctx, index) if needs_temperature else None
        result = {"closed": _closed_observables(cfg, spec, psi0, grid, references)}
        ctx.record("unitary", "evolve", index, n_times=len(grid))
        if open_system:
            result["open"], result["open_error"] = _open_observables(cfg, H, psi0, grid, references, index, ctx)
        return result

    skip_on = (UnreachableTemperatureError,) if needs_temperature else ()
    results = _evaluate_samples(cfg, ctx, sample, max_workers, show_progress, skip_on)
    n_used = len(results)

    columns: Dict[str, np.ndarray] = {"time_ns": grid.times.copy()}
    closed_mean, closed_err = MetricsCalculator.mean_and_stderr(_stack(results, "closed"))
    if open_system:
        open_mean, open_err = MetricsCalculator.mean_and_stderr(_stack(results, "open"))
        if n_used == 1:
            # a single sample carries only the trajectory noise
            open_err = _stack(results, "open_error")[0]
        for k, name in enumerate(cfg.observables):
            columns[name] = open_mean[k]
            columns[f"{name}_stderr"] = open_err[k]
        for k, name in enumerate(cfg.observables):
            columns[f"{name}_unitary"] = closed_mean[k]
            columns[f"{name}_unitary_stderr"] = closed_err[k]
    else:
        for k, name in enumerate(cfg.observables):
            columns[name] = closed_mean[k]
            columns[f"{name}_stderr"] = closed_err[k]

    headline = _quench_headline(cfg, columns, grid)
    provenance = {
        "theta0": angles.theta0,
        "phi0": angles.phi0,
        "n_time_points": len(grid),
        "n_samples_used": n_used,
        "lindblad_method": _lindblad_method(cfg) if open_system else None,
    }
    ctx.record("emit", "reduce", rows=len(grid))
    return ResultTable(cfg.scenario.value, columns, _metadata(cfg, ctx, headline, provenance))


def _lindblad_method(cfg: ExperimentConfig) -> str:
    if cfg.lindblad_method != "auto":
        return cfg.lindblad_method
    return "dense" if cfg.chain.n_sites <= Limits.DENSE_LINDBLAD_MAX_SITES else "trajectories"


def _quench_headline(cfg: ExperimentConfig, columns: Dict[str, np.ndarray], grid: TimeGrid) -> Dict:
    times = grid.times
    headline = {"t_max_ns": grid.t_max}
    if "sigma_z_mean" in columns:
        sigma_z = columns["sigma_z_mean"]
        headline["sigma_z_sign_changes_0_400ns"] = MetricsCalculator.count_sign_changes(sigma_z, times, (0.0, 400.0))
        headline["sigma_z_max_abs_0_400ns"] = MetricsCalculator.max_abs(sigma_z, times, (0.0, 400.0))
        headline["sigma_z_max_abs_after_150ns"] = MetricsCalculator.max_abs(sigma_z, times, (150.0, grid.t_max))
    if "entropy_mean" in columns:
        headline["entropy_max"] = float(np.max(columns["entropy_mean"]))
        if cfg.chain.n_sites >= 2:
            headline["page_value"] = page_value(cfg.chain.n_sites)
    for name in cfg.observables:
        if f"{name}_unitary" in columns:
            headline[f"{name}_gap_at_t_max"] = float(columns[name][-1] - columns[f"{name}_unitary"][-1])
    return headline


def _normalized(energies: np.ndarray, e_min: float, e_max: float) -> np.ndarray:
    return np.clip(normalize_energies(energies, e_min, e_max), 0.0, 1.0)


def _coherent_energies(cfg: ExperimentConfig, g: np.ndarray, points: Sequence[Tuple[float, float]]) -> np.ndarray:
    terms = hamiltonian_terms(cfg.chain, g)
    return np.array([coherent_energy(terms, BlochAngles(theta0=t, phi0=p)) for t, p in points])


def run_sweep(cfg: ExperimentConfig, max_workers: Optional[int] = None,
              show_progress: bool = False) -> ResultTable:
    """
    Window-averaged site-averaged entanglement entropy over the angle grid

    The eigendecomposition of each disorder sample is shared by every grid
    point; all initial states are propagated together as one batch.
    """
    if cfg.scenario != Scenario.SWEEP:
        raise DomainError(f"run_sweep cannot run scenario {cfg.scenario.value}")
    ctx = RunContext(cfg.scenario.value)
    n_sites = cfg.chain.n_sites
    points = cfg.angle_points()
    batch = np.stack([spin_coherent(BlochAngles(theta0=t, phi0=p), n_sites).amplitudes for t, p in points], axis=1)
    times = cfg.grid.build().times
    in_window = MetricsCalculator.window_mask(times, cfg.average_window)
    # the record grid starts at 0, the average only reads the window
    record_grid = TimeGrid(np.concatenate([[0.0], times[in_window]]))
    keys = [f"entropy_{k}" for k in range(len(points))]

    def sample(payload):
        index, g = payload
        spec = diagonalize_chain(cfg.chain, g, resolve_sectors=cfg.resolve_sectors)
        ctx.record("diagonalize", "diagonalize", index)
        entropies = np.array([batch_site_averaged_entropy(states, n_sites)
                              for states in propagate(spec, batch, record_grid.times)])
        ctx.record("batch_propagation", "evolve", index, n_states=len(points), n_times=len(record_grid))
        traj = Trajectory(record_grid, dict(zip(keys, entropies.T)))
        averaged = np.array([time_average(traj, key, cfg.average_window) for key in keys])
        epsilon = _normalized(_coherent_energies(cfg, g, points), spec.e_min, spec.e_max)
        return {"entropy": averaged, "epsilon": epsilon}

    results = _evaluate_samples(cfg, ctx, sample, max_workers, show_progress)
    entropy, entropy_err = MetricsCalculator.mean_and_stderr(_stack(results, "entropy"))
    epsilon = MetricsCalculator.mean_and_stderr(_stack(results, "epsilon"))[0]
    columns = {
        "theta0": np.array([t for t, _ in points]),
        "phi0": np.array([p for _, p in points]),
        "entropy_time_avg": entropy,
        "entropy_time_avg_stderr": entropy_err,
        "epsilon": epsilon,
    }

    headline = {"entropy_time_avg_max": float(entropy.max()), "entropy_time_avg_min": float(entropy.min())}
    if n_sites >= 2:
        headline["page_value"] = page_value(n_sites)
    equator = np.isclose(columns["theta0"], math.pi / 2)
    if np.any(equator):
        slice_phi = columns["phi0"][equator]
        headline["equator_min_phi0_over_pi"] = float(slice_phi[np.argmin(entropy[equator])] / math.pi)
    provenance = {
        "n_grid_points": len(points),
        "window_ns": list(cfg.average_window),
        "n_window_times": int(np.count_nonzero(in_window)),
        "n_samples_used": len(results),
    }
    return ResultTable(cfg.scenario.value, columns, _metadata(cfg, ctx, headline, provenance))


def run_spectrum_stats(cfg: ExperimentConfig, max_workers: Optional[int] = None,
                       show_progress: bool = False) -> ResultTable:
    """
    Level-spacing ratio histogram with the folded GOE overlay

    Companion tables hold the density of states ("dos") and the normalized
    energy of every spin-coherent state on the angle grid ("energy").
    """
    if cfg.scenario != Scenario.SPECTRUM_STATS:
        raise DomainError(f"run_spectrum_stats cannot run scenario {cfg.scenario.value}")
    ctx = RunContext(cfg.scenario.value)
    points = (cfg.angle_grid or AngleGrid()).points()
    if has_y_parity(cfg.chain) and not cfg.resolve_sectors:
        ctx.warn("y-parity sectors are not resolved; ratios mix two independent spectra")

    def sample(payload):
        index, g = payload
        spec = diagonalize_chain(cfg.chain, g, resolve_sectors=cfg.resolve_sectors)
        ctx.record("diagonalize", "diagonalize", index, n_sectors=1 if spec.sectors is None else 2)
        stats = level_spacing_ratios(spec, cfg.trim_fraction)
        return {
            "stats": stats,
            "ratio_density": stats.histogram(cfg.ratio_bins).density,
            "dos": density_of_states(spec, cfg.dos_bins).density,
            "epsilon": _normalized(_coherent_energies(cfg, g, points), spec.e_min, spec.e_max),
        }

    results = _evaluate_samples(cfg, ctx, sample, max_workers, show_progress)
    pooled = LevelStatistics.pooled([r["stats"] for r in results.values()])
    for warning in pooled.warnings:
        ctx.warn(warning)

    ratio_density, ratio_err = MetricsCalculator.mean_and_stderr(_stack(results, "ratio_density"))
    ratio_edges = np.linspace(0.0, 1.0, cfg.ratio_bins + 1)
    histogram = Histogram(edges=ratio_edges, density=ratio_density)
    dos, dos_err = MetricsCalculator.mean_and_stderr(_stack(results, "dos"))
    dos_edges = np.linspace(0.0, 1.0, cfg.dos_bins + 1)
    epsilon, epsilon_err = MetricsCalculator.mean_and_stderr(_stack(results, "epsilon"))

    headline = {
        "mean_r": pooled.mean_r,
        "goe_mean_r": goe_mean_r(),
        "tv_distance_goe": goe_total_variation(histogram),
        "n_ratios": int(pooled.ratios.size),
        "n_degenerate_dropped": pooled.n_degenerate_dropped,
        "n_sectors": pooled.n_sectors,
    }
    provenance = {"trim_fraction": cfg.trim_fraction, "n_samples_used": len(results)}
    metadata = _metadata(cfg, ctx, headline, provenance)
    companions = {
        "dos": ResultTable(f"{cfg.scenario.value}-dos", {
            "epsilon_center": Histogram(edges=dos_edges, density=dos).centers,
            "dos": dos,
            "dos_stderr": dos_err,
        }, metadata),
        "energy": ResultTable(f"{cfg.scenario.value}-energy", {
            "theta0": np.array([t for t, _ in points]),
            "phi0": np.array([p for _, p in points]),
            "epsilon": epsilon,
            "epsilon_stderr": epsilon_err,
        }, metadata),
    }
    columns = {
        "r_center": histogram.centers,
        "r_density": ratio_density,
        "r_density_stderr": ratio_err,
        "goe_folded": goe_bin_density(ratio_edges),
    }
    return ResultTable(cfg.scenario.value, columns, metadata, companions)


def run_thermal_curve(cfg: ExperimentConfig, max_workers: Optional[int] = None,
                      show_progress: bool = False) -> ResultTable:
    """Disorder-averaged site-averaged concurrence of the Gibbs state per J*beta"""
    if cfg.scenario != Scenario.THERMAL_CURVE:
        raise DomainError(f"run_thermal_curve cannot run scenario {cfg.scenario.value}")
    ctx = RunContext(cfg.scenario.value)
    jbeta = cfg.jbeta_grid()
    betas = jbeta / cfg.chain.mean_J_angular

    def sample(payload):
        index, g = payload
        spec = diagonalize_chain(cfg.chain, g, resolve_sectors=cfg.resolve_sectors)
        ctx.record("diagonalize", "diagonalize", index)
        curve = thermal_concurrence_curve(spec, betas, EigenstateMarginals(spec))
        ctx.record("thermal_marginals", "reduce", index, n_betas=len(betas))
        return {"concurrence": curve}

    results = _evaluate_samples(cfg, ctx, sample, max_workers, show_progress)
    curve, curve_err = MetricsCalculator.mean_and_stderr(_stack(results, "concurrence"))
    columns = {"jbeta": jbeta, "concurrence_mean": curve, "concurrence_mean_stderr": curve_err}

    order = np.argsort(jbeta)
    plateau = MetricsCalculator.zero_plateau(jbeta[order], curve[order], anchor=0.0)
    headline = {
        "zero_plateau_jbeta": list(plateau) if plateau else None,
        "concurrence_at_reference_jbeta": float(np.interp(REFERENCE_JBETA, jbeta[order], curve[order])),
        "concurrence_max": float(curve.max()),
    }
    provenance = {"n_jbeta": int(jbeta.size), "jbeta_scale_rad_per_ns": cfg.chain.mean_J_angular,
                  "n_samples_used": len(results)}
    return ResultTable(cfg.scenario.value, columns, _metadata(cfg, ctx, headline, provenance))


def run_beta_solve(cfg: ExperimentConfig, max_workers: Optional[int] = None,
                   show_progress: bool = False) -> ResultTable:
    """
    Effective J*beta and normalized energy per initial state, disorder-averaged

    States whose energy lies at a spectral edge have no finite temperature;
    they contribute NaN and are left out of the average.
    """
    if cfg.scenario != Scenario.BETA_SOLVE:
        raise DomainError(f"run_beta_solve cannot run scenario {cfg.scenario.value}")
    ctx = RunContext(cfg.scenario.value)
    points = cfg.angle_points()
    scale = cfg.chain.mean_J_angular

    def sample(payload):
        index, g = payload
        spec = diagonalize_chain(cfg.chain, g, resolve_sectors=cfg.resolve_sectors)
        ctx.record("diagonalize", "diagonalize", index)
        energy_tol = Tolerances.BETA_ENERGY * build_hamiltonian(cfg.chain, g).max_abs()
        energies = _coherent_energies(cfg, g, points)
        jbeta = np.full(len(points), np.nan)
        for k, energy in enumerate(energies):
            try:
                jbeta[k] = solve_beta(spec.eigenvalues, energy, energy_tol, scale).beta_dimensionless
            except UnreachableTemperatureError as e:
                logger.debug("sample %d, state %s: %s", index, points[k], e)
        ctx.record("solve_beta", "solve", index, n_unreachable=int(np.isnan(jbeta).sum()))
        return {"jbeta": jbeta, "epsilon": _normalized(energies, spec.e_min, spec.e_max)}

    results = _evaluate_samples(cfg, ctx, sample, max_workers, show_progress)
    jbeta, jbeta_err, n_finite = MetricsCalculator.nan_mean_and_stderr(_stack(results, "jbeta"))
    epsilon, epsilon_err = MetricsCalculator.mean_and_stderr(_stack(results, "epsilon"))
    if np.any(n_finite < len(results)):
        ctx.warn("some states have no finite temperature in some samples; see n_reachable")
    columns = {
        "theta0": np.array([t for t, _ in points]),
        "phi0": np.array([p for _, p in points]),
        "jbeta": jbeta,
        "jbeta_stderr": jbeta_err,
        "epsilon": epsilon,
        "epsilon_stderr": epsilon_err,
        "n_reachable": n_finite.astype(int),
    }
    headline = {}
    if len(points) == 1:
        headline = {"jbeta": float(jbeta[0]), "epsilon": float(epsilon[0])}
    provenance = {"n_states": len(points), "jbeta_scale_rad_per_ns": scale, "n_samples_used": len(results)}
    return ResultTable(cfg.scenario.value, columns, _metadata(cfg, ctx, headline, provenance))


SCENARIO_RUNNERS = {
    Scenario.QUENCH: run_quench,
    Scenario.LINDBLAD_QUENCH: run_quench,
    Scenario.SWEEP: run_sweep,
    Scenario.SPECTRUM_STATS: run_spectrum_stats,
    Scenario.THERMAL_CURVE: run_thermal_curve,
    Scenario.BETA_SOLVE: run_beta_solve,
}


def run_experiment(cfg: ExperimentConfig, max_workers: Optional[int] = None,
                   show_progress: bool = False) -> ResultTable:
    """Dispatch a validated configuration to its scenario"""
    logger.info("running scenario %s (%d disorder samples, hash %s)",
                cfg.scenario.value, cfg.n_disorder_samples, config_hash(cfg))
    return SCENARIO_RUNNERS[cfg.scenario](cfg, max_workers=max_workers, show_progress=show_progress)


def _format_float(value: float) -> str:
    return np.format_float_positional(value, precision=RunnerDefaults.CSV_SIGNIFICANT_DIGITS,
                                      unique=False, fractional=False, trim="-")


def _write_csv(table: ResultTable, path: Path):
    table.to_frame().to_csv(path, index=False, float_format=_format_float,
                            lineterminator="\n", na_rep="nan", encoding="utf-8")


def emit(table: ResultTable, directory) -> List[Path]:
    """
    Write <scenario>-<hash>.csv, one <scenario>-<hash>-<name>.csv per companion
    table, and the <scenario>-<hash>.json metadata sidecar

    Raises:
        OutputError: a file could not be written
    """
    directory = Path(directory)
    stem = f"{table.name}-{table.metadata['config_hash']}"
    targets = [(directory / f"{stem}.csv", table)]
    targets += [(directory / f"{stem}-{suffix}.csv", companion)
                for suffix, companion in sorted(table.companions.items())]
    sidecar = directory / f"{stem}.json"

    path = directory
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for path, target in targets:
            _write_csv(target, path)
        path = sidecar
        document = dict(table.metadata)
        document["files"] = [p.name for p, _ in targets]
        document["columns"] = {p.name: list(t.columns) for p, t in targets}
        with open(sidecar, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(document, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e

    written = [p for p, _ in targets] + [sidecar]
    logger.info("wrote %s", ", ".join(str(p) for p in written))
    return written


def load_sidecar(path) -> Tuple[Dict, ExperimentConfig]:
    """Read a metadata sidecar and rebuild the configuration it records"""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise OutputError(f"cannot read {path}: {e}") from e
    return document, ExperimentConfig.model_validate(document["config"])
