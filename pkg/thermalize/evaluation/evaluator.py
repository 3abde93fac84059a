"""
Batch Evaluation Runner
Runs independent work items (disorder samples, trajectories, grid points)
sequentially or on a thread pool, with a deterministic keyed reduction
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Tuple, Type

from tqdm import tqdm

from .. import config

logger = logging.getLogger(__name__)


class BatchEvaluator:
    """Evaluate a function over keyed work items and collect results by key"""

    def __init__(
        self,
        max_workers: Optional[int] = None,
        show_progress: bool = False,
        description: str = "work items",
        skip_on: Tuple[Type[BaseException], ...] = (),
    ):
        """
        Initialize evaluator

        Args:
            max_workers: Thread count; 1 runs sequentially (default: config.DEFAULT_THREADS)
            show_progress: Display a tqdm progress bar
            description: Label of the progress bar and log lines
            skip_on: Exception types recorded as skipped items instead of aborting
        """
        self.max_workers = max(1, max_workers or config.DEFAULT_THREADS)
        self.show_progress = show_progress
        self.description = description
        self.skip_on = skip_on
        self.results: Dict[Hashable, Any] = {}
        self.skipped: Dict[Hashable, str] = {}

    def run(self, items: Iterable[Tuple[Hashable, Any]], fn: Callable[[Any], Any]) -> Dict[Hashable, Any]:
        """
        Evaluate fn(payload) for every (key, payload) item

        Args:
            items: (key, payload) pairs; keys must be unique and sortable
            fn: Worker function, must not mutate shared state

        Returns:
            Dict of results ordered by key; skipped keys are listed in self.skipped
        """
        items = list(items)
        keys = [key for key, _ in items]
        if len(set(keys)) != len(keys):
            raise ValueError("work item keys must be unique")

        self.results = {}
        self.skipped = {}
        logger.debug("evaluating %d %s on %d worker(s)", len(items), self.description, self.max_workers)

        if self.max_workers == 1 or len(items) <= 1:
            self._run_sequential(items, fn)
        else:
            self._run_parallel(items, fn)

        if self.skipped:
            logger.warning("skipped %d of %d %s", len(self.skipped), len(items), self.description)
        return {key: self.results[key] for key in sorted(self.results)}

    def _run_sequential(self, items: List[Tuple[Hashable, Any]], fn: Callable[[Any], Any]):
        for key, payload in tqdm(items, desc=self.description, disable=not self.show_progress):
            try:
                self.results[key] = fn(payload)
            except self.skip_on as e:
                logger.info("%s %s skipped: %s", self.description, key, e)
                self.skipped[key] = str(e)

    def _run_parallel(self, items: List[Tuple[Hashable, Any]], fn: Callable[[Any], Any]):
        results_lock = threading.Lock()

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_key = {executor.submit(fn, payload): key for key, payload in items}

            with tqdm(total=len(items), desc=self.description, disable=not self.show_progress) as progress:
                for future in as_completed(future_to_key):
                    key = future_to_key[future]
                    try:
                        result = future.result()
                    except self.skip_on as e:
                        logger.info("%s %s skipped: %s", self.description, key, e)
                        with results_lock:
                            self.skipped[key] = str(e)
                    except BaseException:
                        for pending in future_to_key:
                            pending.cancel()
                        raise
                    else:
                        with results_lock:
                            self.results[key] = result
                    progress.update(1)
