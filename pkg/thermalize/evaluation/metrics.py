"""
Ensemble Metrics
Disorder-ensemble statistics and the summary figures reported after a scenario run
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import DomainError

# Values at or below this magnitude count as zero
ZERO_ATOL = 1e-12


class MetricsCalculator:
    """Statistics over disorder samples and curve diagnostics"""

    @staticmethod
    def mean_and_stderr(samples) -> Tuple[np.ndarray, np.ndarray]:
        """
        Ensemble mean and standard error along the first axis

        Args:
            samples: Array of shape (n_samples, ...)

        Returns:
            (mean, standard error); the error is 0 for a single sample
        """
        samples = np.asarray(samples, dtype=float)
        if samples.shape[0] == 0:
            raise DomainError("cannot average an empty ensemble")
        mean = samples.mean(axis=0)
        if samples.shape[0] == 1:
            return mean, np.zeros_like(mean)
        stderr = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
        return mean, stderr

    @staticmethod
    def nan_mean_and_stderr(samples) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Like mean_and_stderr, ignoring non-finite entries

        Returns:
            (mean, standard error, number of finite samples); mean is NaN where no sample is finite
        """
        samples = np.asarray(samples, dtype=float)
        finite = np.isfinite(samples)
        counts = finite.sum(axis=0)
        safe_counts = np.maximum(counts, 1)
        mean = np.where(finite, samples, 0.0).sum(axis=0) / safe_counts
        squares = np.where(finite, (np.where(finite, samples, 0.0) - mean) ** 2, 0.0).sum(axis=0)
        stderr = np.sqrt(squares / np.maximum(counts - 1, 1)) / np.sqrt(safe_counts)
        stderr = np.where(counts > 1, stderr, 0.0)
        mean = np.where(counts > 0, mean, np.nan)
        return mean, np.where(counts > 0, stderr, np.nan), counts

    @staticmethod
    def window_mask(times, window: Optional[Tuple[float, float]] = None) -> np.ndarray:
        """Boolean mask of the grid points inside [t_lo, t_hi]"""
        times = np.asarray(times, dtype=float)
        if window is None:
            return np.ones(times.shape, dtype=bool)
        lo, hi = window
        return (times >= lo) & (times <= hi)

    @staticmethod
    def count_sign_changes(values, times=None, window: Optional[Tuple[float, float]] = None) -> int:
        """
        Number of sign changes of a series, ignoring exact zeros

        Args:
            values: Real series
            times: Grid of the series (needed with window)
            window: Optional (t_lo, t_hi) restriction

        Returns:
            Count of adjacent nonzero samples with opposite signs
        """
        values = np.asarray(values, dtype=float)
        if window is not None:
            values = values[MetricsCalculator.window_mask(times, window)]
        signs = np.sign(values[np.abs(values) > ZERO_ATOL])
        return int(np.count_nonzero(signs[1:] != signs[:-1]))

    @staticmethod
    def max_abs(values, times=None, window: Optional[Tuple[float, float]] = None) -> float:
        """Largest |value| inside the window"""
        values = np.asarray(values, dtype=float)
        if window is not None:
            values = values[MetricsCalculator.window_mask(times, window)]
        return float(np.max(np.abs(values))) if values.size else 0.0

    @staticmethod
    def total_variation_distance(p, q) -> float:
        """Half the l1 distance between two probability vectors"""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if p.shape != q.shape:
            raise DomainError(f"distributions of shapes {p.shape} and {q.shape}")
        return float(0.5 * np.abs(p - q).sum())

    @staticmethod
    def zero_plateau(xs, ys, anchor: float = 0.0, atol: float = ZERO_ATOL) -> Optional[Tuple[float, float]]:
        """
        Contiguous x-range around anchor on which |y| <= atol

        Args:
            xs: Increasing grid
            ys: Values on the grid
            anchor: Point the plateau must contain (nearest grid point is used)
            atol: Zero threshold

        Returns:
            (x_lo, x_hi) or None if the value at the anchor is nonzero
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        start = int(np.argmin(np.abs(xs - anchor)))
        if abs(ys[start]) > atol:
            return None
        lo = hi = start
        while lo > 0 and abs(ys[lo - 1]) <= atol:
            lo -= 1
        while hi < len(xs) - 1 and abs(ys[hi + 1]) <= atol:
            hi += 1
        return float(xs[lo]), float(xs[hi])

    @staticmethod
    def summarize_columns(columns: Dict[str, Sequence[float]], skip: Sequence[str] = ()) -> Dict:
        """Min / max / mean of every numeric column, for the console summary"""
        summary = {}
        for name, values in columns.items():
            if name in skip:
                continue
            values = np.asarray(values, dtype=float)
            if values.size == 0:
                continue
            summary[name] = {
                "min": float(np.min(values)),
                "max": float(np.max(values)),
                "mean": float(np.mean(values)),
            }
        return summary

    @staticmethod
    def print_summary(name: str, n_rows: int, summary: Dict, metadata: Optional[Dict] = None):
        """Print a human-readable summary of a result table"""
        print("\n" + "=" * 70)
        print(f"📊 RESULT SUMMARY: {name}")
        print("=" * 70)
        print(f"\nRows: {n_rows}")

        for column, stats in summary.items():
            print(f"   {column}: min {stats['min']:.6g}  max {stats['max']:.6g}  mean {stats['mean']:.6g}")

        if metadata:
            headline = metadata.get("headline", {})
            if headline:
                print("\n📌 Headline values:")
                for key, value in headline.items():
                    print(f"   {key}: {value}")
            warnings = metadata.get("warnings", [])
            if warnings:
                print("\n⚠️  Warnings:")
                for warning in warnings:
                    print(f"   {warning}")

        print("\n" + "=" * 70 + "\n")
