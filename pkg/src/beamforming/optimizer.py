"""
Wave-Based Beamforming Optimizers
Multi-restart gradient ascent on the SIM phases and per-atom successive refinement.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.beamforming.rates import (
    PowerAllocation,
    RateReport,
    batch_sum_rate,
    sumrate_at,
    sumrate_gradient,
)
from src.physics.propagation import PhaseState, TransferStack, batch_response, TWO_PI
from src.utils.line_search import LineSearchOptions, armijo_step


logger = logging.getLogger(__name__)


class NumericalError(ArithmeticError):
    """Raised when an objective or gradient becomes non-finite."""
    pass


@dataclass(frozen=True)
class WbfOptions:
    """Gradient-ascent settings."""
    max_iters: int = 500
    restarts: int = 4
    tolerance: float = 1e-4          # bps/Hz improvement that counts as converged
    line_search: LineSearchOptions = field(default_factory=LineSearchOptions)


@dataclass(frozen=True)
class RefinementOptions:
    """Per-atom search over `levels` uniformly spaced phases, `sweeps` passes over all atoms."""
    levels: int = 16
    sweeps: int = 2


def _ascend(stack: TransferStack, h: np.ndarray, pa: PowerAllocation, noise_power: float,
            start: PhaseState, options: WbfOptions) -> Tuple[RateReport, list, int, bool]:
    def objective(theta: np.ndarray) -> float:
        return sumrate_at(stack, PhaseState(theta), h, pa, noise_power).sum_rate

    theta = start.theta
    value = objective(theta)
    if not np.isfinite(value):
        raise NumericalError("sum-rate is not finite at the initial phases")
    trace = [value]
    step = None
    converged = False
    iterations = 0

    for iterations in range(1, options.max_iters + 1):
        grad = sumrate_gradient(stack, PhaseState(theta), h, pa, noise_power)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("sum-rate gradient is not finite")
        candidate, candidate_value, accepted = armijo_step(
            objective, theta, value, grad, float(np.sum(grad ** 2)), step, options.line_search
        )
        if candidate is None:
            converged = True
            break
        improvement = candidate_value - value
        theta, value = candidate, candidate_value
        trace.append(value)
        step = accepted * options.line_search.growth
        if improvement < options.tolerance:
            converged = True
            break

    report = sumrate_at(stack, PhaseState(theta), h, pa, noise_power)
    return report, trace, iterations, converged


def optimize_wbf(stack: TransferStack, h: np.ndarray, pa: PowerAllocation, noise_power: float,
                 options: Optional[WbfOptions] = None, rng: Optional[np.random.Generator] = None,
                 init: Optional[PhaseState] = None) -> Tuple[PhaseState, RateReport]:
    """
    Maximise the sum-rate over theta for a fixed power allocation.

    Each restart starts from Uniform[0, 2 pi) phases (restart 0 from `init` when
    given) and runs backtracking gradient ascent; the best restart is returned.

    Args:
        stack: Transfer matrices
        h: K x N channel from the outer layer to the users
        pa: Fixed power allocation
        noise_power: sigma^2
        options: Ascent settings
        rng: Generator for the random initialisations
        init: Optional warm start

    Returns:
        (best phases, RateReport with trace, iterations and converged flag)
    """
    options = options or WbfOptions()
    if rng is None and (init is None or options.restarts > 1):
        raise ValueError("an rng is required for random restarts")

    best = None
    for restart in range(options.restarts):
        if restart == 0 and init is not None:
            start = init
        else:
            start = PhaseState.random(rng, stack.num_layers, stack.atoms_per_layer)
        report, trace, iterations, converged = _ascend(stack, h, pa, noise_power, start, options)
        logger.debug("restart %d: %.4f bps/Hz after %d iterations", restart, report.sum_rate, iterations)
        if best is None or report.sum_rate > best[0].sum_rate:
            best = (report, trace, iterations, converged)

    report, trace, iterations, converged = best
    if not converged:
        logger.info("gradient ascent hit max_iters=%d without converging", options.max_iters)
    report = report.tagged("wbf", iterations=iterations, converged=converged, trace=tuple(trace))
    return report.phases, report


def successive_refinement(stack: TransferStack, h: np.ndarray, pa: PowerAllocation, noise_power: float,
                          init: PhaseState, options: Optional[RefinementOptions] = None) -> Tuple[PhaseState, RateReport]:
    """
    Refine one meta-atom at a time: try every candidate phase for atom (l, n) with
    all others fixed and keep the best. An atom only changes when the sum-rate
    strictly improves, so the trace is non-decreasing.
    """
    options = options or RefinementOptions()
    candidates = np.arange(options.levels) * (TWO_PI / options.levels)
    theta = np.array(init.theta)
    value = sumrate_at(stack, init, h, pa, noise_power).sum_rate
    trace = [value]

    for _ in range(options.sweeps):
        changed = False
        for l in range(stack.num_layers):
            for n in range(stack.atoms_per_layer):
                batch = np.repeat(theta[None, :, :], options.levels, axis=0)
                batch[:, l, n] = candidates
                rates = batch_sum_rate(np.matmul(h, batch_response(stack, batch)), pa.p, noise_power)
                best = int(np.argmax(rates))
                if rates[best] > value:
                    theta[l, n] = candidates[best]
                    value = float(rates[best])
                    changed = True
        trace.append(value)
        if not changed:
            break

    phases = PhaseState(theta)
    report = sumrate_at(stack, phases, h, pa, noise_power)
    return phases, report.tagged("refine", iterations=len(trace) - 1, trace=tuple(trace))
