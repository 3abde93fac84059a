"""
Scenario presets
Named configuration documents; a config file may start from one with {"preset": name, ...overrides}
"""
import copy
from typing import Dict, List

from ..utils.errors import ConfigError

PRESETS: Dict[str, Dict] = {
    "quench-all-excited": {
        "description": "|pi, 0> quench: strong thermalization of sigma^z and the entropy",
        "scenario": "quench",
        "initial_preset": "all_excited",
        "observables": ["sigma_z_mean", "entropy_mean"],
    },
    "quench-equator-eight-fifths-pi": {
        "description": "|pi/2, 8pi/5> quench: strong thermalization from an equatorial state",
        "scenario": "quench",
        "initial_preset": "equator_eight_fifths_pi",
        "observables": ["sigma_z_mean", "entropy_mean"],
    },
    "quench-equator-quarter-pi": {
        "description": "|pi/2, pi/4> quench: weak thermalization, trace distance and concurrence",
        "scenario": "quench",
        "initial_preset": "equator_quarter_pi",
        "observables": ["sigma_z_mean", "entropy_mean", "concurrence_mean", "trace_distance_mean"],
    },
    "sweep-default": {
        "description": "Time-averaged entropy over the 17 x 33 (theta0, phi0) grid",
        "scenario": "sweep",
        "angle_grid": {},
    },
    "spectrum-stats-default": {
        "description": "Density of states, energy surface and level-spacing ratios",
        "scenario": "spectrum-stats",
        "angle_grid": {},
    },
    "thermal-curve-default": {
        "description": "Gibbs-state concurrence for J beta in [-3, 3]",
        "scenario": "thermal-curve",
    },
    "lindblad-quench-quarter-pi": {
        "description": "|pi/2, pi/4> quench with T1 = 23.6 us and T2 = 3.82 us next to the closed system",
        "scenario": "lindblad-quench",
        "initial_preset": "equator_quarter_pi",
        "observables": ["entropy_mean", "concurrence_mean"],
        "decoherence": {"T1": 23600.0, "T2": 3820.0},
    },
    "beta-solve-quarter-pi": {
        "description": "Effective J beta of |pi/2, pi/4> without disorder",
        "scenario": "beta-solve",
        "initial_preset": "equator_quarter_pi",
        "chain": {"field_disorder_W": 0.0},
        "n_disorder_samples": 1,
    },
    "beta-solve-grid": {
        "description": "Effective J beta over the (theta0, phi0) grid",
        "scenario": "beta-solve",
        "angle_grid": {},
    },
}


def list_presets() -> List[str]:
    return sorted(PRESETS)


def describe_preset(name: str) -> str:
    return preset_document(name).get("description", "")


def preset_document(name: str) -> Dict:
    """Deep copy of a preset document, description included"""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {list_presets()}") from None


def merge_documents(base: Dict, overrides: Dict) -> Dict:
    """Recursive merge; nested dicts are merged, everything else is replaced"""
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_documents(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_document(document: Dict) -> Dict:
    """Expand {"preset": name, ...} into a full configuration document"""
    resolved = dict(document)
    if "preset" in resolved:
        base = preset_document(resolved.pop("preset"))
        resolved = merge_documents(base, resolved)
    resolved.pop("description", None)
    return resolved
