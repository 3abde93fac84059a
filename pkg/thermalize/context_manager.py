"""
Run Context
Tracks the execution steps, skipped samples and warnings of one scenario run
"""
import logging
import threading
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class ExecutionStep:
    """Represents a single step of a scenario run"""
    step_name: str
    step_type: str  # "validate", "diagonalize", "solve", "evolve", "reduce", "emit"
    details: Dict = field(default_factory=dict)
    sample: Optional[int] = None

    def to_dict(self):
        return asdict(self)


class RunContext:
    """
    Provenance ledger of a run

    Steps may be recorded from worker threads. The export only holds sorted
    counts and no timestamps, so it is identical across thread counts and reruns.
    """

    def __init__(self, scenario: str):
        self.scenario = scenario
        self.execution_steps: List[ExecutionStep] = []
        self.skipped_samples: Dict[int, str] = {}
        self.warnings: List[str] = []
        self._lock = threading.Lock()

    def add_step(self, step: ExecutionStep):
        """Add an execution step to history"""
        with self._lock:
            self.execution_steps.append(step)

    def record(self, step_name: str, step_type: str, sample: Optional[int] = None, **details):
        self.add_step(ExecutionStep(step_name, step_type, details, sample))

    def skip_sample(self, sample: int, reason: str):
        """Record a disorder sample excluded from the ensemble average"""
        with self._lock:
            self.skipped_samples[sample] = reason
        logger.warning("sample %d skipped: %s", sample, reason)

    def warn(self, message: str):
        """Attach a warning to the run (deduplicated)"""
        with self._lock:
            if message in self.warnings:
                return
            self.warnings.append(message)
        logger.warning(message)

    def export_to_dict(self) -> Dict:
        """Deterministic summary for the metadata sidecar"""
        step_counts: Dict[str, int] = {}
        for step in self.execution_steps:
            step_counts[step.step_type] = step_counts.get(step.step_type, 0) + 1
        return {
            "scenario": self.scenario,
            "step_counts": dict(sorted(step_counts.items())),
            "skipped_samples": {str(k): v for k, v in sorted(self.skipped_samples.items())},
            "n_skipped_samples": len(self.skipped_samples),
            "warnings": sorted(self.warnings),
        }
