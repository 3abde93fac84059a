"""
Configuration for the thermalization laboratory
Numerical tolerances, physical defaults and runner settings
"""
import math
import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    """Read a float override from THERMALIZE_<name>"""
    value = os.getenv(f"THERMALIZE_{name}")
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    """Read an int override from THERMALIZE_<name>"""
    value = os.getenv(f"THERMALIZE_{name}")
    return int(value) if value not in (None, "") else default


ARTIFACT_VERSION = "1.0.0"


class Tolerances:
    """Numerical tolerances shared by every module"""

    # StateVector / DensityMatrix invariants
    NORM = _env_float("NORM_TOL", 1e-10)
    HERMITIAN = _env_float("HERMITIAN_TOL", 1e-10)
    TRACE = _env_float("TRACE_TOL", 1e-10)
    POSITIVITY = _env_float("POSITIVITY_TOL", 1e-8)
    OPERATOR_HERMITIAN = _env_float("OPERATOR_HERMITIAN_TOL", 1e-12)

    # expectation values
    IMAG_ERROR = _env_float("IMAG_ERROR_TOL", 1e-8)

    # eigendecomposition reconstruction
    RECONSTRUCTION = _env_float("RECONSTRUCTION_TOL", 1e-9)
    EIGEN_RESIDUAL = _env_float("EIGEN_RESIDUAL_TOL", 1e-8)

    # entropy: eigenvalues below this contribute 0
    ENTROPY_CUTOFF = _env_float("ENTROPY_CUTOFF", 1e-14)

    # concurrence: clamp window and hard failure threshold for Gamma eigenvalues
    GAMMA_CLAMP = _env_float("GAMMA_CLAMP_TOL", 1e-10)
    GAMMA_ERROR = _env_float("GAMMA_ERROR_TOL", 1e-8)

    # temperature solver, relative to max |H_ij|
    BETA_ENERGY = _env_float("BETA_ENERGY_TOL", 1e-10)

    # level statistics: spacings below this (relative to bandwidth) count as degenerate
    DEGENERATE_SPACING = _env_float("DEGENERATE_SPACING_TOL", 1e-12)

    # Lindblad integration
    LINDBLAD_ATOL = _env_float("LINDBLAD_ATOL", 1e-10)
    LINDBLAD_RTOL = _env_float("LINDBLAD_RTOL", 1e-8)
    TRAJECTORY_ATOL = _env_float("TRAJECTORY_ATOL", 1e-9)
    TRAJECTORY_RTOL = _env_float("TRAJECTORY_RTOL", 1e-7)

    # symmetry detection for sector-resolved diagonalization
    SYMMETRY = _env_float("SYMMETRY_TOL", 1e-12)


class Limits:
    """Size limits of the dense code paths"""

    MAX_DIAGONALIZATION_SITES = _env_int("MAX_DIAGONALIZATION_SITES", 12)
    DENSE_LINDBLAD_MAX_SITES = _env_int("DENSE_LINDBLAD_MAX_SITES", 8)
    # DensityMatrix positivity is only checked up to this dimension (eigvalsh cost)
    POSITIVITY_CHECK_MAX_DIM = _env_int("POSITIVITY_CHECK_MAX_DIM", 256)
    # matrix_function / diagonalize residual checks up to this dimension
    RESIDUAL_CHECK_MAX_DIM = _env_int("RESIDUAL_CHECK_MAX_DIM", 1024)


class ChainDefaults:
    """Default physical parameters (MHz, ordinary frequency)"""

    N_SITES = 12
    COUPLING_J_MHZ = 12.3       # average of the per-bond values
    FIELD_G_MEAN_MHZ = 6.7
    FIELD_DISORDER_W_MHZ = 1.0
    FIELD_PHASE = math.pi / 2
    # per-bond couplings of the device, J/2pi in MHz
    DEVICE_COUPLINGS_MHZ = [12.4, 12.3, 12.4, 12.4, 12.2, 13.3, 13.6, 13.7, 13.8, 13.7, 13.6]
    # per-site T1 (us) and Ramsey T2* (us) of the device
    DEVICE_T1_US = [20.6, 24.3, 28.1, 24.0, 26.3, 27.3, 21.4, 25.4, 21.4, 18.8, 22.2, 18.7]
    DEVICE_T2_US = [3.9, 2.2, 2.0, 2.0, 4.9, 1.8, 2.1, 2.0, 2.3, 1.9, 4.4, 2.8]
    T1_NS = 23600.0
    T2_NS = 3820.0


class RunnerDefaults:
    """Scenario defaults"""

    T_MAX_NS = 600.0
    N_TIME_POINTS = 121
    N_DISORDER_SAMPLES = 20
    AVERAGE_WINDOW_NS = (100.0, 200.0)
    SWEEP_THETA_POINTS = 17
    SWEEP_PHI_POINTS = 33
    DOS_BINS = 40
    RATIO_BINS = 20
    TRIM_FRACTION = 0.1
    N_TRAJECTORIES = 200
    # J*beta grid of the thermal concurrence curve
    JBETA_MIN = -3.0
    JBETA_MAX = 3.0
    JBETA_POINTS = 121
    # CSV float formatting: significant digits
    CSV_SIGNIFICANT_DIGITS = 12


# Execution
DEFAULT_THREADS = _env_int("THREADS", 1)
DEFAULT_OUTPUT_DIR = os.getenv("THERMALIZE_OUTPUT_DIR", "output")

# Logging
LOG_LEVEL = os.getenv("THERMALIZE_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("THERMALIZE_LOG_FILE", "")  # empty: console only
