"""
Spin-coherent initial states
Every qubit prepared along the Bloch direction (theta0, phi0)
"""
import math
from functools import reduce
from typing import Dict, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .qcore import StateVector
from .utils.errors import DomainError


class BlochAngles(BaseModel):
    """Polar angle theta0 in [0, pi] and azimuth phi0 reduced to [0, 2 pi)"""
    model_config = ConfigDict(frozen=True)

    theta0: float = Field(ge=0.0, le=math.pi)
    phi0: float = 0.0

    @field_validator("phi0")
    @classmethod
    def _wrap_phi(cls, value: float) -> float:
        wrapped = math.fmod(value, 2 * math.pi)
        if wrapped < 0:
            wrapped += 2 * math.pi
        # fmod of a value just below 2 pi can round up to 2 pi
        return 0.0 if wrapped >= 2 * math.pi else wrapped

    def single_site(self) -> np.ndarray:
        """cos(theta0/2)|+Z> + e^{-i phi0} sin(theta0/2)|-Z>"""
        return np.array([
            math.cos(self.theta0 / 2),
            np.exp(-1j * self.phi0) * math.sin(self.theta0 / 2),
        ], dtype=complex)

    def bloch_vector(self) -> Tuple[float, float, float]:
        """(<X>, <Y>, <Z>) of the single-site state"""
        return (
            math.sin(self.theta0) * math.cos(self.phi0),
            -math.sin(self.theta0) * math.sin(self.phi0),
            math.cos(self.theta0),
        )


def spin_coherent(angles: BlochAngles, n_sites: int) -> StateVector:
    """
    Product state with every site along (theta0, phi0)

    Args:
        angles: Bloch angles
        n_sites: Number of sites

    Returns:
        Normalized StateVector
    """
    if n_sites < 1:
        raise DomainError("n_sites must be positive")
    single = angles.single_site()
    amplitudes = reduce(np.kron, [single] * n_sites)
    return StateVector.normalized(n_sites, amplitudes)


def coherent_energy(terms: Sequence[Tuple[complex, Sequence[Tuple[int, str]]]], angles: BlochAngles) -> float:
    """
    <theta0, phi0| H |theta0, phi0> from the Pauli decomposition of H

    Every site carries the same Bloch vector, so a Pauli string evaluates to the
    product of its axis components. Avoids building the 2^n state.
    """
    components = dict(zip("xyz", angles.bloch_vector()))
    components["i"] = 1.0
    energy = 0.0
    for coefficient, factors in terms:
        value = complex(coefficient)
        for _, axis in factors:
            if axis not in components:
                raise DomainError(f"axis {axis!r} has no real expectation value")
            value *= components[axis]
        energy += value.real
    return float(energy)


# Named initial states used by the quench presets
PRESET_STATES: Dict[str, BlochAngles] = {
    "all_excited": BlochAngles(theta0=math.pi, phi0=0.0),
    "equator_quarter_pi": BlochAngles(theta0=math.pi / 2, phi0=math.pi / 4),
    "equator_eight_fifths_pi": BlochAngles(theta0=math.pi / 2, phi0=8 * math.pi / 5),
    "all_ground": BlochAngles(theta0=0.0, phi0=0.0),
}


def preset_state(name: str) -> BlochAngles:
    """Look up a named initial state"""
    try:
        return PRESET_STATES[name]
    except KeyError:
        raise DomainError(
            f"unknown initial state {name!r}; choose from {sorted(PRESET_STATES)}"
        ) from None
