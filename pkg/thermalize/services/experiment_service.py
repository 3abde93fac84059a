"""
Experiment Service - Manages configuration loading and the run lifecycle
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from .. import config
from ..runner import ExperimentConfig, ResultTable, emit, run_experiment
from ..utils.errors import ConfigError
from .presets import resolve_document

logger = logging.getLogger(__name__)


class ExperimentService:
    """Service for loading experiment configurations and running them"""

    def __init__(self, project_root: Optional[Path] = None):
        self.project_root = Path(project_root) if project_root else Path.cwd()

    def _resolve_path(self, path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.project_root / path

    def load_config(self, path) -> ExperimentConfig:
        """
        Read, resolve and validate a JSON configuration file

        Args:
            path: Configuration file, relative paths are taken from project_root

        Returns:
            Validated ExperimentConfig

        Raises:
            ConfigError: unreadable file, malformed JSON or invalid configuration
        """
        config_path = self._resolve_path(path)
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read {config_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"{config_path} must hold a JSON object")
        logger.debug("loaded configuration from %s", config_path)
        return self.validate(document)

    def validate(self, document: Dict) -> ExperimentConfig:
        """Resolve presets and validate a configuration document"""
        try:
            return ExperimentConfig.model_validate(resolve_document(document))
        except ValidationError as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    @staticmethod
    def with_overrides(cfg: ExperimentConfig, output_dir: Optional[str] = None,
                       seed: Optional[int] = None) -> ExperimentConfig:
        """Copy of cfg with the command-line overrides applied and revalidated"""
        document = cfg.model_dump(mode="json")
        if output_dir is not None:
            document["output_dir"] = str(output_dir)
        if seed is not None:
            document["seed"] = seed
        try:
            return ExperimentConfig.model_validate(document)
        except ValidationError as e:
            raise ConfigError(f"invalid override: {e}") from e

    def run(self, cfg: ExperimentConfig, output_dir: Optional[str] = None, threads: Optional[int] = None,
            seed: Optional[int] = None, show_progress: bool = True) -> Tuple[ResultTable, List[Path]]:
        """
        Run a scenario and write its result files

        Args:
            cfg: Validated configuration
            output_dir: Output directory override
            threads: Worker threads (default: config.DEFAULT_THREADS)
            seed: Seed override
            show_progress: Display progress bars

        Returns:
            Tuple of (result table, written file paths)
        """
        cfg = self.with_overrides(cfg, output_dir, seed)
        print(f"🔬 Running scenario {cfg.scenario.value} ({cfg.n_disorder_samples} disorder samples)...")
        table = run_experiment(cfg, max_workers=threads or config.DEFAULT_THREADS, show_progress=show_progress)
        return table, emit(table, self._resolve_path(cfg.output_dir))
