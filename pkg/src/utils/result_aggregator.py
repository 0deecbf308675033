"""
Result Aggregator Utility
Collects per-trial values of a sweep and reduces them into ResultRow objects.
Values are stored by trial index, so completion order never changes a row.
"""

from collections import defaultdict
from dataclasses import dataclass, asdict
from typing import Dict, Any, List, Tuple

from src.utils.metrics import MetricsCalculator


CSV_COLUMNS = ("L", "scheme", "metric", "mean", "stderr", "trials", "seconds")


@dataclass(frozen=True)
class ResultRow:
    """One (L, scheme, metric) point of a sweep."""
    L: int
    scheme: str
    metric: str
    mean: float
    stderr: float
    trials: int
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ResultAggregator:
    """
    Collects trial values keyed by (L, scheme, metric).
    Provides ordered rows for emission.
    """

    def __init__(self):
        self._values: Dict[Tuple[int, str, str], Dict[int, float]] = defaultdict(dict)
        self._seconds: Dict[Tuple[int, str, str], float] = defaultdict(float)
        self._order: List[Tuple[int, str, str]] = []

    def add(self, layers: int, scheme: str, metric: str, trial: int, value: float,
            seconds: float = 0.0) -> None:
        """
        Record one trial value.

        Raises:
            ValueError: The same trial was already recorded for this point
        """
        key = (layers, scheme, metric)
        if key not in self._values:
            self._order.append(key)
        if trial in self._values[key]:
            raise ValueError(f"trial {trial} already recorded for {key}")
        self._values[key][trial] = float(value)
        self._seconds[key] += seconds

    def declare(self, layers: int, scheme: str, metric: str) -> None:
        """Reserve a point so it is emitted even if every trial was skipped."""
        key = (layers, scheme, metric)
        if key not in self._values:
            self._order.append(key)
            self._values[key] = {}

    def values(self, layers: int, scheme: str, metric: str) -> List[float]:
        """Trial values in trial-index order."""
        recorded = self._values.get((layers, scheme, metric), {})
        return [recorded[trial] for trial in sorted(recorded)]

    def seconds(self, layers: int, scheme: str, metric: str) -> float:
        return self._seconds.get((layers, scheme, metric), 0.0)

    def get_rows(self, record_timing: bool = False) -> List[ResultRow]:
        """
        Reduce every point to a ResultRow, in first-declared order (declare points
        up front when trials complete out of order).

        Args:
            record_timing: Fill `seconds` with summed wall-clock time (else 0)
        """
        rows = []
        for key in self._order:
            layers, scheme, metric = key
            stats = MetricsCalculator.calculate(self.values(*key))
            rows.append(ResultRow(
                L=layers,
                scheme=scheme,
                metric=metric,
                mean=stats.mean,
                stderr=stats.stderr,
                trials=stats.trials,
                seconds=round(self._seconds[key], 6) if record_timing else 0.0,
            ))
        return rows
