"""
Backtracking (Armijo) line search over phase arrays.
Used for sum-rate ascent and DOA loss descent.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class LineSearchOptions:
    """Armijo parameters; max_phase_step bounds the first trial move (radians)."""
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    max_backtracks: int = 30
    initial_phase_step: float = np.pi / 8
    max_phase_step: float = np.pi
    growth: float = 2.0


def armijo_step(objective: Callable[[np.ndarray], float], theta: np.ndarray, value: float,
                direction: np.ndarray, slope: float, step: Optional[float],
                options: LineSearchOptions, maximize: bool = True) -> Tuple[Optional[np.ndarray], float, float]:
    """
    Try theta + t * direction for t = step, step*shrink, ... until the Armijo
    condition holds.

    Args:
        objective: Function of theta
        theta: Current point
        value: objective(theta)
        direction: Search direction (gradient for ascent, -gradient for descent)
        slope: Directional derivative along direction (> 0 for an improving direction)
        step: Starting step, or None to start from initial_phase_step / max|direction|
        options: Armijo parameters
        maximize: Ascent if True, descent if False

    Returns:
        (new_theta or None if no step was accepted, new_value, accepted_step)
    """
    peak = float(np.max(np.abs(direction)))
    if peak == 0.0 or slope <= 0.0:
        return None, value, 0.0

    ceiling = options.max_phase_step / peak
    t = options.initial_phase_step / peak if step is None else min(step, ceiling)
    sign = 1.0 if maximize else -1.0
    for _ in range(options.max_backtracks):
        candidate = theta + t * direction
        candidate_value = objective(candidate)
        if sign * (candidate_value - value) >= options.sufficient_increase * t * slope:
            return candidate, candidate_value, t
        t *= options.shrink
    return None, value, 0.0
