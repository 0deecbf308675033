"""
Unit Tests for wave-based beamforming optimizers and the line search
"""

import numpy as np
import pytest

from sim_helpers import make_stack, random_channel
from src.beamforming.optimizer import (
    NumericalError,
    RefinementOptions,
    WbfOptions,
    optimize_wbf,
    successive_refinement,
)
from src.beamforming.rates import PowerAllocation, batch_sum_rate, effective_matrix, sumrate_at
from src.physics.propagation import PhaseState, batch_response, sim_response
from src.utils.line_search import LineSearchOptions, armijo_step


def _instance(seed, layers=1, atoms=4, users=2):
    rng = np.random.default_rng(seed)
    _, _, stack = make_stack(layers, atoms, users)
    h = random_channel(rng, users, atoms)
    reference = effective_matrix(h, sim_response(stack, PhaseState.zeros(layers, atoms)))
    noise = float(np.mean(np.abs(reference) ** 2)) / 10.0
    return rng, stack, h, PowerAllocation.uniform(users, 1.0), noise


class TestArmijoStep:
    """Backtracking line search."""

    def test_ascent_on_quadratic(self):
        theta = np.array([[0.0]])
        objective = lambda t: float(-np.sum((t - 1.0) ** 2))
        grad = -2.0 * (theta - 1.0)
        candidate, value, step = armijo_step(objective, theta, objective(theta), grad, float(np.sum(grad ** 2)),
                                             None, LineSearchOptions())
        assert candidate is not None
        assert value > objective(theta)
        assert step > 0

    def test_descent_direction(self):
        theta = np.array([[2.0]])
        objective = lambda t: float(np.sum(t ** 2))
        grad = 2.0 * theta
        candidate, value, _ = armijo_step(objective, theta, objective(theta), -grad, float(np.sum(grad ** 2)),
                                          None, LineSearchOptions(), maximize=False)
        assert value < objective(theta)
        assert abs(candidate[0, 0]) < 2.0

    def test_zero_direction_rejected(self):
        theta = np.zeros((1, 2))
        candidate, value, step = armijo_step(lambda t: 1.0, theta, 1.0, np.zeros((1, 2)), 0.0, None,
                                             LineSearchOptions())
        assert candidate is None
        assert value == 1.0
        assert step == 0.0

    def test_first_move_bounded(self):
        theta = np.zeros((1, 1))
        direction = np.array([[100.0]])
        options = LineSearchOptions()
        candidate, _, _ = armijo_step(lambda t: float(t[0, 0]), theta, 0.0, direction, 1e4, 1e9, options)
        assert candidate[0, 0] <= options.max_phase_step + 1e-12


class TestOptimizeWbf:
    """Multi-restart gradient ascent."""

    @pytest.mark.parametrize("seed", range(100))
    def test_trace_non_decreasing(self, seed):
        rng, stack, h, pa, noise = _instance(seed, layers=2)
        _, report = optimize_wbf(stack, h, pa, noise, WbfOptions(max_iters=60, restarts=2), rng)
        assert np.all(np.diff(report.trace) >= 0)
        assert report.scheme == "wbf"
        assert report.sum_rate == pytest.approx(report.trace[-1])

    def test_improves_on_start(self):
        rng, stack, h, pa, noise = _instance(20)
        start = PhaseState.random(np.random.default_rng(99), 1, 4)
        initial = sumrate_at(stack, start, h, pa, noise).sum_rate
        phases, report = optimize_wbf(stack, h, pa, noise, WbfOptions(restarts=1), init=start)
        assert report.sum_rate >= initial
        assert phases.shape == (1, 4)

    def test_beats_random_search(self):
        rng, stack, h, pa, noise = _instance(21)
        _, report = optimize_wbf(stack, h, pa, noise, WbfOptions(restarts=8, tolerance=1e-7), rng)
        candidates = np.random.default_rng(5).uniform(0, 2 * np.pi, size=(10_000, 1, 4))
        best = max(
            float(np.max(batch_sum_rate(np.matmul(h, batch_response(stack, candidates[i:i + 1000])), pa.p, noise)))
            for i in range(0, 10_000, 1000)
        )
        assert report.sum_rate >= best - 1e-3

    def test_single_user_reaches_flat_optimum(self):
        # with K = 1 only |B_00| matters; every restart lands on the same value
        rng = np.random.default_rng(30)
        _, _, stack = make_stack(1, 4, 1)
        h = random_channel(rng, 1, 4)
        pa = PowerAllocation.uniform(1, 1.0)
        rates = [
            optimize_wbf(stack, h, pa, 1e-4, WbfOptions(restarts=1, tolerance=1e-9), np.random.default_rng(s))[1].sum_rate
            for s in range(3)
        ]
        assert max(rates) - min(rates) < 1e-3

    def test_seeded_runs_identical(self):
        _, stack, h, pa, noise = _instance(40)
        first = optimize_wbf(stack, h, pa, noise, WbfOptions(max_iters=30), np.random.default_rng(3))[1]
        second = optimize_wbf(stack, h, pa, noise, WbfOptions(max_iters=30), np.random.default_rng(3))[1]
        assert first.sum_rate == second.sum_rate
        np.testing.assert_array_equal(first.phases.theta, second.phases.theta)

    def test_requires_rng_for_restarts(self):
        _, stack, h, pa, noise = _instance(41)
        with pytest.raises(ValueError, match="rng"):
            optimize_wbf(stack, h, pa, noise, WbfOptions(restarts=2))

    def test_non_finite_channel(self):
        _, stack, h, pa, noise = _instance(42)
        h = h.copy()
        h[0, 0] = np.nan
        with pytest.raises(NumericalError):
            optimize_wbf(stack, h, pa, noise, WbfOptions(restarts=1), np.random.default_rng(0))


class TestSuccessiveRefinement:
    """Per-atom discrete search."""

    def test_never_decreases(self):
        rng, stack, h, pa, noise = _instance(50, layers=2)
        start = PhaseState.random(rng, 2, 4)
        initial = sumrate_at(stack, start, h, pa, noise).sum_rate
        phases, report = successive_refinement(stack, h, pa, noise, start, RefinementOptions(levels=8, sweeps=2))
        assert report.scheme == "refine"
        assert report.sum_rate >= initial
        assert np.all(np.diff(report.trace) >= 0)
        assert report.trace[0] == pytest.approx(initial)

    def test_changed_atoms_land_on_levels(self):
        rng, stack, h, pa, noise = _instance(51)
        start = PhaseState.zeros(1, 4)
        phases, _ = successive_refinement(stack, h, pa, noise, start, RefinementOptions(levels=4, sweeps=1))
        steps = phases.theta / (np.pi / 2)
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-12)
