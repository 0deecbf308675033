"""
Metrics Calculator Utility
Monte-Carlo statistics for sweep points: mean, standard error and binomial spread.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class TrialStatistics:
    """Summary of one sweep point's per-trial values."""
    mean: float = 0.0
    stderr: float = 0.0
    trials: int = 0


class MetricsCalculator:
    """Calculate Monte-Carlo summary statistics."""

    @staticmethod
    def calculate(values: Sequence[float]) -> TrialStatistics:
        """
        Mean and standard error of the mean (sample std / sqrt(n); 0 for a single trial).

        Args:
            values: Per-trial values in trial-index order

        Returns:
            TrialStatistics (all zeros for an empty sequence)
        """
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return TrialStatistics()
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        return TrialStatistics(mean=mean, stderr=stderr, trials=int(values.size))

    @staticmethod
    def binomial_stderr(accuracy: float, count: int) -> float:
        """sqrt(a (1 - a) / n) for an accuracy measured on `count` samples."""
        if count <= 0:
            return 0.0
        return math.sqrt(max(accuracy * (1.0 - accuracy), 0.0) / count)

