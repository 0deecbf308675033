"""
Water-Filling Power Allocation
Single water-filling step (bisection on the water level, then exact level on the
active set) and the iterative interference-as-noise fixed point.
"""

import logging
from typing import Tuple

import numpy as np

from src.beamforming.rates import PowerAllocation


logger = logging.getLogger(__name__)


class WaterfillConfig:
    """Tolerances for water-filling."""
    BISECTION_ITERS = 200
    BUDGET_TOLERANCE = 1e-9        # relative to P_T
    FIXED_POINT_ITERS = 50
    FIXED_POINT_TOLERANCE = 1e-6   # relative to P_T


class WaterfillError(ValueError):
    """Raised when no channel can carry power."""
    pass


def waterfill(diag_gains, interference, noise_power: float, total_power: float) -> PowerAllocation:
    """
    p_k = max(0, mu - (sigma^2 + I_k) / g_k) with sum(p) = P_T.

    Args:
        diag_gains: K direct gains |B_kk|^2 (>= 0, not all zero)
        interference: K interference powers treated as noise
        noise_power: sigma^2
        total_power: P_T

    Returns:
        PowerAllocation carrying the water level mu

    Raises:
        WaterfillError: All gains are zero, or a gain is negative
    """
    gains = np.asarray(diag_gains, dtype=float)
    interference = np.asarray(interference, dtype=float)
    if np.any(gains < 0):
        raise WaterfillError("gains must be non-negative")
    if not np.any(gains > 0):
        raise WaterfillError("all channel gains are zero")
    if total_power <= 0:
        return PowerAllocation(np.zeros_like(gains), max(total_power, 0.0))

    floors = np.full(gains.shape, np.inf)
    usable = gains > 0
    floors[usable] = (noise_power + interference[usable]) / gains[usable]

    lo = float(np.min(floors))
    hi = lo + total_power
    tolerance = WaterfillConfig.BUDGET_TOLERANCE * total_power
    for _ in range(WaterfillConfig.BISECTION_ITERS):
        mu = 0.5 * (lo + hi)
        filled = np.sum(np.maximum(0.0, mu - floors))
        if abs(filled - total_power) <= tolerance * 1e-3:
            break
        if filled > total_power:
            hi = mu
        else:
            lo = mu

    # exact level on the active set found by bisection; the lowest floor is always active
    best = int(np.argmin(floors))
    active = floors < hi
    active[best] = True
    while True:
        count = int(active.sum())
        # p_k = (P_T + sum_active(floor_j - floor_k)) / |active|, exactly P_T for a single stream
        p = np.where(active, (total_power + (floors[active].sum() - count * floors)) / count, 0.0)
        still_active = active & (p > 0)
        still_active[best] = True
        if still_active.sum() == count:
            break
        active = still_active

    p = np.maximum(p, 0.0)
    return PowerAllocation(p, total_power, water_level=float(floors[best] + p[best]))


def stream_interference(b: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Direct gains |B_kk|^2 and interference sum_{i != k} p_i |B_ki|^2."""
    power = np.abs(b) ** 2
    gains = np.diag(power).copy()
    interference = power @ p - gains * p
    return gains, interference


def waterfill_fixed_point(b: np.ndarray, noise_power: float, total_power: float,
                          initial: PowerAllocation = None) -> Tuple[PowerAllocation, int, bool]:
    """
    Iterative water-filling with the interference of the current powers treated as noise.

    Args:
        b: K x K effective matrix
        noise_power: sigma^2
        total_power: P_T
        initial: Starting allocation (uniform if omitted)

    Returns:
        (allocation, iterations, converged)
    """
    k = b.shape[0]
    allocation = initial or PowerAllocation.uniform(k, total_power)
    tolerance = WaterfillConfig.FIXED_POINT_TOLERANCE * total_power

    for iteration in range(1, WaterfillConfig.FIXED_POINT_ITERS + 1):
        gains, interference = stream_interference(b, allocation.p)
        updated = waterfill(gains, interference, noise_power, total_power)
        change = float(np.max(np.abs(updated.p - allocation.p)))
        allocation = updated
        if change <= tolerance:
            return allocation, iteration, True

    logger.debug("water-filling fixed point not reached in %d iterations", WaterfillConfig.FIXED_POINT_ITERS)
    return allocation, WaterfillConfig.FIXED_POINT_ITERS, False
