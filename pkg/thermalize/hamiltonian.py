"""
Chain Hamiltonian
Hard-core XY chain with a transverse drive, field disorder and chemical-potential disorder

    H = sum_b lambda_b (X_b X_b+1 + Y_b Y_b+1)
      + sum_j g_j (cos(phi) X_j - sin(phi) Y_j)
      + sum_j mu_j (I - Z_j) / 2

with lambda_b = J_b / 2, open boundaries, all energies in rad/ns. The drive is
sum_j g_j (e^{-i phi} s+_j + e^{i phi} s-_j) under the ladder convention of qcore.
At the default phi = pi/2 it reads -g Y (not +g Y), the orientation paired with
the e^{-i phi0} phase of the spin-coherent states in initial.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import ChainDefaults, Tolerances
from .qcore import Factor, HermitianOperator, pauli_string, pauli_sum
from .utils.errors import DomainError

logger = logging.getLogger(__name__)

Term = Tuple[complex, List[Factor]]

# x -> y, y -> z, z -> x under the per-site rotation u = [[1, 1], [i, -i]] / sqrt(2)
Y_FRAME_AXES = {"x": "y", "y": "z", "z": "x"}
Y_FRAME_SITE_ROTATION = np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2)


class UnitSystem:
    """hbar = 1; inputs are ordinary frequencies in MHz, internal energies in rad/ns"""

    MHZ_TO_ANGULAR = 2.0 * math.pi * 1e-3

    @staticmethod
    def mhz_to_angular(value):
        """MHz -> rad/ns; scalars stay scalars"""
        if np.ndim(value):
            return np.asarray(value, dtype=float) * UnitSystem.MHZ_TO_ANGULAR
        return float(value) * UnitSystem.MHZ_TO_ANGULAR

    @staticmethod
    def angular_to_mhz(value):
        """rad/ns -> MHz"""
        if np.ndim(value):
            return np.asarray(value, dtype=float) / UnitSystem.MHZ_TO_ANGULAR
        return float(value) / UnitSystem.MHZ_TO_ANGULAR


class ChainConfig(BaseModel):
    """
    Physical parameters of the chain (MHz)

    coupling_J accepts a per-bond list, a single value broadcast to every bond,
    or the preset name "device" for the device's per-bond couplings.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_sites: int = Field(default=ChainDefaults.N_SITES, ge=1)
    coupling_J: Optional[List[float]] = None
    field_g_mean: float = ChainDefaults.FIELD_G_MEAN_MHZ
    field_disorder_W: float = Field(default=ChainDefaults.FIELD_DISORDER_W_MHZ, ge=0.0)
    field_phase: float = ChainDefaults.FIELD_PHASE
    potential_mu: Optional[List[float]] = None
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _expand_couplings(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        n_sites = data.get("n_sites", ChainDefaults.N_SITES)
        coupling = data.get("coupling_J")
        if coupling is None:
            data["coupling_J"] = [ChainDefaults.COUPLING_J_MHZ] * max(n_sites - 1, 0)
        elif isinstance(coupling, str):
            if coupling != "device":
                raise ValueError(f"unknown coupling preset {coupling!r}")
            if n_sites != len(ChainDefaults.DEVICE_COUPLINGS_MHZ) + 1:
                raise ValueError("the device coupling preset needs n_sites = 12")
            data["coupling_J"] = list(ChainDefaults.DEVICE_COUPLINGS_MHZ)
        elif isinstance(coupling, (int, float)):
            data["coupling_J"] = [float(coupling)] * max(n_sites - 1, 0)
        if data.get("potential_mu") is None:
            data["potential_mu"] = [0.0] * n_sites
        return data

    @field_validator("coupling_J")
    @classmethod
    def _positive_couplings(cls, value):
        if any(j <= 0 for j in value):
            raise ValueError("all couplings must be strictly positive")
        return value

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.coupling_J) != self.n_sites - 1:
            raise ValueError(
                f"coupling_J has {len(self.coupling_J)} entries, expected {self.n_sites - 1}"
            )
        if len(self.potential_mu) != self.n_sites:
            raise ValueError(
                f"potential_mu has {len(self.potential_mu)} entries, expected {self.n_sites}"
            )
        return self

    def lambdas(self) -> np.ndarray:
        """Per-bond lambda = J / 2 in rad/ns"""
        return UnitSystem.mhz_to_angular(np.asarray(self.coupling_J, dtype=float)) / 2.0

    @property
    def mean_J_angular(self) -> float:
        """Mean coupling J in rad/ns (the scale of J*beta)"""
        if not self.coupling_J:
            return 0.0
        return float(np.mean(UnitSystem.mhz_to_angular(np.asarray(self.coupling_J))))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.coupling_J)) <= 1

    def updated(self, **changes) -> "ChainConfig":
        """Validated copy with some fields replaced"""
        data = self.model_dump()
        if "n_sites" in changes:
            # a uniform coupling is broadcast to the new length, other arrays reset
            data["coupling_J"] = self.coupling_J[0] if self.coupling_J and self.is_uniform else None
            data["potential_mu"] = None
        data.update(changes)
        return ChainConfig(**data)


def _snap(value: float) -> float:
    """Round trigonometric values that are zero up to rounding"""
    return 0.0 if abs(value) < 1e-15 else value


def field_values(cfg: ChainConfig, g_samples: Optional[Sequence[float]]) -> np.ndarray:
    if g_samples is None:
        return sample_disorder(cfg, 1)[0]
    g = np.asarray(g_samples, dtype=float)
    if g.shape != (cfg.n_sites,):
        raise DomainError(f"g_samples has shape {g.shape}, expected ({cfg.n_sites},)")
    return g


def hamiltonian_terms(cfg: ChainConfig, g_samples: Optional[Sequence[float]] = None,
                      include_drive: bool = True) -> List[Term]:
    """
    Pauli decomposition of the chain Hamiltonian in rad/ns

    Args:
        cfg: Chain parameters
        g_samples: Per-site drive amplitudes in MHz (default: disorder sample 0)
        include_drive: Drop the drive terms when False

    Returns:
        (coefficient, factors) pairs; the identity carries an empty factor list
    """
    n = cfg.n_sites
    terms: List[Term] = []
    for bond, lam in enumerate(cfg.lambdas(), start=1):
        terms.append((float(lam), [(bond, "x"), (bond + 1, "x")]))
        terms.append((float(lam), [(bond, "y"), (bond + 1, "y")]))

    if include_drive:
        g = UnitSystem.mhz_to_angular(field_values(cfg, g_samples))
        cos_phi = _snap(math.cos(cfg.field_phase))
        sin_phi = _snap(math.sin(cfg.field_phase))
        for site in range(1, n + 1):
            if cos_phi:
                terms.append((float(g[site - 1] * cos_phi), [(site, "x")]))
            if sin_phi:
                terms.append((float(-g[site - 1] * sin_phi), [(site, "y")]))

    mu = UnitSystem.mhz_to_angular(np.asarray(cfg.potential_mu, dtype=float))
    for site in range(1, n + 1):
        if mu[site - 1]:
            terms.append((float(mu[site - 1] / 2), []))
            terms.append((float(-mu[site - 1] / 2), [(site, "z")]))
    return terms


def to_y_frame(terms: Sequence[Term]) -> List[Term]:
    """Relabel Pauli axes so sigma^y becomes diagonal (U^dagger H U with U = u^{(x)n})"""
    return [(c, [(site, Y_FRAME_AXES[axis]) for site, axis in factors]) for c, factors in terms]


def build_hamiltonian(cfg: ChainConfig, g_samples: Optional[Sequence[float]] = None,
                      frame: str = "z") -> HermitianOperator:
    """
    Sparse chain Hamiltonian in rad/ns

    Args:
        cfg: Chain parameters
        g_samples: Per-site drive amplitudes in MHz, overriding disorder sampling
        frame: "z" for the computational basis, "y" for the sigma^y-diagonal frame

    Returns:
        HermitianOperator on cfg.n_sites sites
    """
    terms = hamiltonian_terms(cfg, g_samples)
    if frame == "y":
        terms = to_y_frame(terms)
    elif frame != "z":
        raise DomainError(f"unknown frame {frame!r}")
    if not terms:
        dim = 2 ** cfg.n_sites
        return HermitianOperator(cfg.n_sites, np.zeros((dim, dim)))
    return pauli_sum(cfg.n_sites, terms)


def disorder_generator(seed: int, sample_index: int) -> np.random.Generator:
    """Counter-based generator for one disorder sample; streams are independent per index"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, sample_index])))


def sample_disorder(cfg: ChainConfig, n_samples: int, start: int = 0) -> List[np.ndarray]:
    """
    Per-site drive amplitudes g_j uniform on [g_mean - W, g_mean + W] (MHz)

    Sample k only depends on (cfg.seed, start + k), so samples can be drawn
    independently by parallel workers.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    samples = []
    for index in range(start, start + n_samples):
        if cfg.field_disorder_W == 0:
            samples.append(np.full(cfg.n_sites, cfg.field_g_mean, dtype=float))
            continue
        rng = disorder_generator(cfg.seed, index)
        samples.append(rng.uniform(cfg.field_g_mean - cfg.field_disorder_W,
                                   cfg.field_g_mean + cfg.field_disorder_W, cfg.n_sites))
    return samples


def drive_term(cfg: ChainConfig, g_samples: Optional[Sequence[float]] = None) -> HermitianOperator:
    """Sum_j g_j (e^{-i phi} s+_j + e^{i phi} s-_j) in rad/ns"""
    g = UnitSystem.mhz_to_angular(field_values(cfg, g_samples))
    phase = np.exp(-1j * cfg.field_phase)
    terms = []
    for site in range(1, cfg.n_sites + 1):
        terms.append((g[site - 1] * phase, [(site, "+")]))
        terms.append((g[site - 1] * np.conj(phase), [(site, "-")]))
    op = pauli_sum(cfg.n_sites, terms)
    return HermitianOperator(cfg.n_sites, op.matrix, hermitian=True)


def excitation_number(n_sites: int) -> HermitianOperator:
    """Total excitation number sum_j s+_j s-_j = sum_j (I - Z_j) / 2"""
    terms = []
    for site in range(1, n_sites + 1):
        terms.append((0.5, []))
        terms.append((-0.5, [(site, "z")]))
    return pauli_sum(n_sites, terms)


def global_y_rotation(n_sites: int) -> HermitianOperator:
    """R = prod_j exp(-i pi Y_j / 2) = (-i)^n Y^{(x)n}; unitary, flagged non-Hermitian"""
    string = pauli_string(n_sites, [(site, "y") for site in range(1, n_sites + 1)])
    return HermitianOperator(n_sites, string.matrix * (-1j) ** n_sites, hermitian=False)


def has_y_parity(cfg: ChainConfig) -> bool:
    """True when H commutes with the global y-parity Y^{(x)n}: phi = pi/2 (mod pi) and mu = 0"""
    offset = math.remainder(cfg.field_phase - math.pi / 2, math.pi)
    return abs(offset) < Tolerances.SYMMETRY and not any(cfg.potential_mu)


def is_reflection_symmetric(cfg: ChainConfig, g_samples: Optional[Sequence[float]] = None) -> bool:
    """True when couplings, fields and potentials are mirror images under site j -> n + 1 - j"""
    g = field_values(cfg, g_samples)
    J = np.asarray(cfg.coupling_J, dtype=float)
    mu = np.asarray(cfg.potential_mu, dtype=float)
    return all(np.allclose(values, values[::-1], rtol=0.0, atol=Tolerances.SYMMETRY) for values in (g, J, mu))


def rotate_from_y_frame(vectors: np.ndarray, n_sites: int) -> np.ndarray:
    """Apply U = u^{(x)n} to the columns of a matrix of y-frame vectors"""
    n_cols = vectors.shape[1]
    tensor = np.asarray(vectors, dtype=complex).reshape([2] * n_sites + [n_cols])
    for axis in range(n_sites):
        tensor = np.tensordot(Y_FRAME_SITE_ROTATION, tensor, axes=([1], [axis]))
        tensor = np.moveaxis(tensor, 0, axis)
    return tensor.reshape(2 ** n_sites, n_cols)
