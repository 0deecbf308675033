"""
DOA Trainer
Mini-batch descent on the normalized-energy loss with per-batch backtracking.
Every epoch restarts the line search from a bounded phase move. An epoch whose
full noiseless training loss rises is reverted and the bound is halved, so the
per-epoch loss trace never increases.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.doa.classifier import (
    DEFAULT_NOISE_POWER_DBM,
    DEFAULT_TX_POWER_DBM,
    DoaModel,
    one_hot_targets,
    batch_loss,
    doa_loss_gradient,
    evaluate,
)
from src.doa.dataset import DoaSample, stack_uplinks
from src.physics.propagation import PhaseState
from src.utils.line_search import LineSearchOptions, armijo_step


logger = logging.getLogger(__name__)

OPTIMIZERS = ("gradient", "spsa")


class TrainingError(ValueError):
    """Raised for an empty training set or an unknown optimizer."""
    pass


@dataclass(frozen=True)
class TrainOptions:
    """Mini-batch training settings."""
    batch_size: int = 32
    max_epochs: int = 200
    tolerance: float = 1e-5          # epoch-mean loss improvement for early stop
    patience: int = 20               # consecutive reverted epochs (each halves the move bound)
    optimizer: str = "gradient"
    spsa_perturbation: float = 0.05  # radians
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    noise_power_dbm: float = DEFAULT_NOISE_POWER_DBM
    line_search: LineSearchOptions = field(default_factory=LineSearchOptions)


@dataclass(frozen=True, eq=False)
class TrainReport:
    loss_trace: Tuple[float, ...]
    train_accuracy: float
    test_accuracy: Optional[float]
    epochs: int
    seed: Optional[int]
    model: DoaModel
    converged: bool = False


def _spsa_estimate(loss_at: Callable[[np.ndarray], float], theta: np.ndarray,
                   rng: np.random.Generator, perturbation: float) -> Tuple[float, np.ndarray]:
    delta = rng.choice([-1.0, 1.0], size=theta.shape)
    spread = loss_at(theta + perturbation * delta) - loss_at(theta - perturbation * delta)
    return loss_at(theta), spread / (2.0 * perturbation) * delta


def train(model: DoaModel, train_samples: List[DoaSample], options: Optional[TrainOptions] = None,
          rng: Optional[np.random.Generator] = None, test_samples: Optional[List[DoaSample]] = None,
          noise_rng: Optional[np.random.Generator] = None, seed: Optional[int] = None) -> TrainReport:
    """
    Train the SIM phases so the strongest antenna names the target's quadrant.

    Args:
        model: Initial model (its phases are the starting point)
        train_samples: Non-empty training set
        options: Training settings
        rng: Generator for batch shuffling and SPSA perturbations
        test_samples: Optional held-out set scored with noise after training
        noise_rng: Noise generator for the test evaluation (None = noiseless)
        seed: Recorded in the report

    Returns:
        TrainReport; train_accuracy is noiseless, loss_trace[0] is the initial loss

    Raises:
        TrainingError: Empty training set or unknown optimizer
    """
    options = options or TrainOptions()
    if not train_samples:
        raise TrainingError("training set is empty")
    if options.optimizer not in OPTIMIZERS:
        raise TrainingError(f"Unknown optimizer '{options.optimizer}'. Available: {list(OPTIMIZERS)}")
    rng = rng if rng is not None else np.random.default_rng(seed)

    uplinks = stack_uplinks(train_samples)
    targets = one_hot_targets([sample.label for sample in train_samples], model.antenna_map)
    tx = options.tx_power_dbm

    def full_loss(theta: np.ndarray) -> float:
        return batch_loss(model.with_phases(PhaseState(theta)), uplinks, targets, tx)

    theta = np.array(model.phases.theta)
    value = full_loss(theta)
    trace = [value]
    base = options.line_search
    scale = 1.0
    rejected = 0
    converged = False
    epoch = 0

    for epoch in range(1, options.max_epochs + 1):
        epoch_start = theta
        # per-batch moves never exceed the (scaled) initial phase step
        search = replace(base, initial_phase_step=base.initial_phase_step * scale,
                         max_phase_step=base.initial_phase_step * scale)
        step = None
        order = rng.permutation(len(train_samples))
        for start in range(0, len(order), options.batch_size):
            batch = order[start:start + options.batch_size]

            def loss_at(candidate: np.ndarray, batch=batch) -> float:
                return batch_loss(model.with_phases(PhaseState(candidate)), uplinks[batch], targets[batch], tx)

            if options.optimizer == "gradient":
                batch_value, grad = doa_loss_gradient(model.with_phases(PhaseState(theta)),
                                                      uplinks[batch], targets[batch], tx)
            else:
                batch_value, grad = _spsa_estimate(loss_at, theta, rng, options.spsa_perturbation)

            candidate, _, accepted = armijo_step(loss_at, theta, batch_value, -grad, float(np.sum(grad ** 2)),
                                                 step, search, maximize=False)
            if candidate is not None:
                theta = candidate
                step = accepted * search.growth

        epoch_value = full_loss(theta)
        if epoch_value > value:
            theta = epoch_start
            rejected += 1
            scale *= base.shrink
            trace.append(value)
            if rejected >= options.patience:
                logger.info("stopping after %d consecutive reverted epochs", rejected)
                break
            continue

        rejected = 0
        scale = min(1.0, scale * base.growth)
        improvement = value - epoch_value
        value = epoch_value
        trace.append(value)
        if improvement < options.tolerance:
            converged = True
            break

    trained = model.with_phases(PhaseState(theta))
    train_accuracy = evaluate(trained, train_samples, None, tx, options.noise_power_dbm)
    test_accuracy = None
    if test_samples:
        test_accuracy = evaluate(trained, test_samples, noise_rng, tx, options.noise_power_dbm)
    logger.debug("trained %d epochs: loss %.5f, train accuracy %.3f", epoch, value, train_accuracy)

    return TrainReport(
        loss_trace=tuple(trace),
        train_accuracy=train_accuracy,
        test_accuracy=test_accuracy,
        epochs=epoch,
        seed=seed,
        model=trained,
        converged=converged,
    )
