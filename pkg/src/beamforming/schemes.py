"""
Beamforming Schemes
Joint PA + WBF, average-PA WBF, random codebook, digital ZF without SIM and
successive refinement, each as a pure function plus a scheme object the sweep
orchestrator drives per Monte-Carlo trial.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Type

import numpy as np
from scipy import linalg

from src.beamforming.optimizer import RefinementOptions, WbfOptions, optimize_wbf, successive_refinement
from src.beamforming.rates import (
    PowerAllocation,
    RateReport,
    batch_sum_rate,
    effective_matrix,
    sum_rate,
    sumrate_at,
)
from src.beamforming.waterfilling import waterfill, waterfill_fixed_point
from src.physics.channel import ChannelError, ChannelRealization, direct_channel
from src.physics.geometry import Scenario, SimConfig, antenna_array
from src.physics.propagation import (
    PhaseState,
    TWO_PI,
    TransferStack,
    batch_response,
    quantize_phases,
    sim_response,
)
from src.utils.rng import StreamTag, stream


logger = logging.getLogger(__name__)


class JointConfig:
    """Outer alternation limits for joint PA + WBF."""
    MAX_ROUNDS = 20
    TOLERANCE = 1e-3      # bps/Hz


class CodebookConfig:
    SIZE_PER_ATOM = 10    # codebook size = 10 * L * N
    CHUNK = 1024          # candidates evaluated per batch


class ZfConfig:
    RANK_TOLERANCE = 1e-12   # smallest / largest singular value


class RankDeficientChannelError(ChannelError):
    """Raised when the direct channel cannot be zero-forced."""
    pass


# ============================================================================
# Scheme functions
# ============================================================================

def joint_optimize(stack: TransferStack, h: np.ndarray, noise_power: float, total_power: float,
                   options: Optional[WbfOptions] = None, rng: Optional[np.random.Generator] = None,
                   init: Optional[PhaseState] = None) -> RateReport:
    """
    Alternate WBF (gradient ascent, p fixed) and fixed-point water-filling (phases fixed).

    Round 1 is exactly the average-PA solution for the same rng. Every later round
    water-fills to the fixed point at the current phases, then reruns WBF with all
    restarts (restart 0 warm-started from the current phases) under the new powers.
    The outer trace records the best (phases, powers) pair so far and is non-decreasing.

    Args:
        stack: Transfer matrices
        h: K x N channel
        noise_power: sigma^2 (linear mW)
        total_power: P_T (linear mW)
        options: Ascent settings for every round
        rng: Generator for the random restarts
        init: Optional warm start for round 1

    Returns:
        RateReport tagged "joint" (trace = outer sum-rates, iterations = total ascent steps)
    """
    options = options or WbfOptions()
    pa = PowerAllocation.uniform(h.shape[0], total_power)
    phases, report = optimize_wbf(stack, h, pa, noise_power, options, rng, init)
    trace = [report.sum_rate]
    iterations = report.iterations
    converged = False

    for _ in range(JointConfig.MAX_ROUNDS - 1):
        b = effective_matrix(h, sim_response(stack, phases))
        pa, _, _ = waterfill_fixed_point(b, noise_power, total_power, initial=pa)
        phases, candidate = optimize_wbf(stack, h, pa, noise_power, options, rng, init=phases)
        iterations += candidate.iterations
        change = candidate.sum_rate - report.sum_rate
        if change > 0:
            report = candidate
        trace.append(report.sum_rate)
        if change < JointConfig.TOLERANCE:
            converged = True
            break

    return report.tagged("joint", iterations=iterations, converged=converged, trace=tuple(trace),
                         details={"rounds": len(trace)})


def average_pa_scheme(stack: TransferStack, h: np.ndarray, noise_power: float, total_power: float,
                      options: Optional[WbfOptions] = None, rng: Optional[np.random.Generator] = None,
                      init: Optional[PhaseState] = None) -> RateReport:
    """WBF once with p_k = P_T / K fixed."""
    pa = PowerAllocation.uniform(h.shape[0], total_power)
    _, report = optimize_wbf(stack, h, pa, noise_power, options, rng, init)
    return report.tagged("average-pa")


def generate_codebook(rng: np.random.Generator, size: int, num_layers: int, atoms_per_layer: int) -> np.ndarray:
    """size x L x N phase configurations drawn Uniform[0, 2 pi)."""
    return rng.uniform(0.0, TWO_PI, size=(size, num_layers, atoms_per_layer))


def codebook_scheme(stack: TransferStack, h: np.ndarray, noise_power: float, total_power: float,
                    rng: Optional[np.random.Generator] = None, candidates: Optional[np.ndarray] = None,
                    size: Optional[int] = None) -> RateReport:
    """
    Pick the best of a random codebook under uniform PA, then water-fill on the winner.

    Args:
        stack: Transfer matrices
        h: K x N channel
        noise_power: sigma^2
        total_power: P_T
        rng: Generator for the codebook (ignored when candidates are given)
        candidates: Optional explicit C x L x N codebook
        size: Codebook size (default 10 * L * N)

    Returns:
        RateReport tagged "codebook"; details carry the codebook size and winning index
    """
    if candidates is None:
        if rng is None:
            raise ValueError("codebook_scheme needs an rng or explicit candidates")
        size = size or CodebookConfig.SIZE_PER_ATOM * stack.num_layers * stack.atoms_per_layer
        candidates = generate_codebook(rng, size, stack.num_layers, stack.atoms_per_layer)
    candidates = np.asarray(candidates, dtype=float)
    if candidates.ndim != 3 or candidates.shape[0] == 0:
        raise ValueError(f"codebook must be a non-empty C x L x N array, got shape {candidates.shape}")

    uniform = PowerAllocation.uniform(h.shape[0], total_power)
    rates = np.concatenate([
        batch_sum_rate(np.matmul(h, batch_response(stack, candidates[start:start + CodebookConfig.CHUNK])),
                       uniform.p, noise_power)
        for start in range(0, candidates.shape[0], CodebookConfig.CHUNK)
    ])
    winner = int(np.argmax(rates))
    phases = PhaseState(candidates[winner])

    report = sumrate_at(stack, phases, h, uniform, noise_power)
    b = effective_matrix(h, sim_response(stack, phases))
    allocation, pa_iterations, _ = waterfill_fixed_point(b, noise_power, total_power)
    filled = sumrate_at(stack, phases, h, allocation, noise_power)
    if filled.sum_rate > report.sum_rate:
        report = filled

    return report.tagged("codebook", iterations=pa_iterations, trace=(float(rates[0]), float(rates[winner]), report.sum_rate),
                         details={"codebook_size": int(candidates.shape[0]), "winner": winner})


def zf_baseline(h_direct: np.ndarray, noise_power: float, total_power: float) -> RateReport:
    """
    Digital zero-forcing without SIM.

    F = H^H (H H^H)^-1 with unit-norm columns; user k sees gain 1/||f_k||^2 and
    powers are water-filled with zero interference.

    Raises:
        ChannelError: Fewer antennas than users
        RankDeficientChannelError: H is not full row rank
    """
    h_direct = np.asarray(h_direct, dtype=complex)
    k, m = h_direct.shape
    if m < k:
        raise ChannelError(f"zero-forcing needs M >= K, got M={m}, K={k}")

    singular = linalg.svdvals(h_direct)
    if singular[-1] <= ZfConfig.RANK_TOLERANCE * singular[0]:
        raise RankDeficientChannelError(
            f"direct channel is rank deficient (condition {singular[0] / max(singular[-1], 1e-300):.3e})"
        )

    precoder = linalg.pinv(h_direct)
    norms = np.linalg.norm(precoder, axis=0)
    precoder = precoder / norms[None, :]
    gains = 1.0 / norms ** 2

    allocation = waterfill(gains, np.zeros(k), noise_power, total_power)
    report = sum_rate(h_direct @ precoder, allocation, noise_power)
    return report.tagged(f"zf-{m}ta", details={"precoder": precoder})


def quantized_report(stack: TransferStack, h: np.ndarray, report: RateReport,
                     noise_power: float, levels: int) -> RateReport:
    """Re-evaluate a report on its phases projected to `levels` discrete values (same allocation)."""
    phases = quantize_phases(report.phases, levels)
    quantized = sumrate_at(stack, phases, h, report.allocation, noise_power)
    return quantized.tagged(f"{report.scheme}-q{levels}", iterations=report.iterations,
                            converged=report.converged, details={"continuous_sum_rate": report.sum_rate})


# ============================================================================
# Scheme objects
# ============================================================================

@dataclass(frozen=True, eq=False)
class TrialContext:
    """Everything one Monte-Carlo trial of one layer count needs."""
    config: SimConfig
    scenario: Scenario
    stack: Optional[TransferStack]
    channel: Optional[ChannelRealization]
    master_seed: int
    trial: int
    total_power: float

    @property
    def num_layers(self) -> int:
        return self.config.num_layers


@dataclass(frozen=True)
class SchemeSettings:
    """Per-scheme knobs resolved from the experiment configuration."""
    wbf: WbfOptions = field(default_factory=WbfOptions)
    refinement: RefinementOptions = field(default_factory=RefinementOptions)
    codebook_size: Optional[int] = None


class BaseScheme(ABC):
    """
    Abstract base class for all beamforming schemes.
    Handles quantized re-evaluation; child schemes focus on one trial's optimisation.
    """

    layer_independent = False

    def __init__(self, scheme_name: str, settings: Optional[SchemeSettings] = None):
        self.scheme_name = scheme_name
        self.settings = settings or SchemeSettings()
        self.logger = logging.getLogger(scheme_name)

    def run(self, context: TrialContext) -> List[RateReport]:
        """
        Execute one trial and, for a discrete-phase SIM, append the quantized report.

        Returns:
            One report, or two when config.phase_levels is set and the scheme has phases
        """
        report = self.execute(context)
        reports = [report]
        levels = context.config.phase_levels
        if levels is not None and report.phases is not None:
            reports.append(quantized_report(context.stack, context.channel.h, report,
                                            context.channel.noise_power, levels))
        self.logger.debug("trial %d, L=%d: %.4f bps/Hz", context.trial, context.num_layers, report.sum_rate)
        return reports

    def _wbf_stream(self, context: TrialContext) -> np.random.Generator:
        return stream(context.master_seed, StreamTag.WBF, context.num_layers, context.trial)

    @abstractmethod
    def execute(self, context: TrialContext) -> RateReport:
        """
        Run the scheme on one trial.

        Args:
            context: Channel, stack and seed for this (L, trial)

        Returns:
            RateReport tagged with the scheme name
        """
        pass


class JointScheme(BaseScheme):
    def execute(self, context: TrialContext) -> RateReport:
        channel = context.channel
        return joint_optimize(context.stack, channel.h, channel.noise_power, context.total_power,
                              self.settings.wbf, self._wbf_stream(context))


class AveragePaScheme(BaseScheme):
    def execute(self, context: TrialContext) -> RateReport:
        channel = context.channel
        return average_pa_scheme(context.stack, channel.h, channel.noise_power, context.total_power,
                                 self.settings.wbf, self._wbf_stream(context))


class CodebookScheme(BaseScheme):
    def execute(self, context: TrialContext) -> RateReport:
        channel = context.channel
        rng = stream(context.master_seed, StreamTag.CODEBOOK, context.num_layers, context.trial)
        return codebook_scheme(context.stack, channel.h, channel.noise_power, context.total_power,
                               rng, size=self.settings.codebook_size)


class RefineScheme(BaseScheme):
    """Joint PA + WBF, then per-atom refinement of the joint phases."""

    def execute(self, context: TrialContext) -> RateReport:
        channel = context.channel
        joint = joint_optimize(context.stack, channel.h, channel.noise_power, context.total_power,
                               self.settings.wbf, self._wbf_stream(context))
        _, report = successive_refinement(context.stack, channel.h, joint.allocation, channel.noise_power,
                                          joint.phases, self.settings.refinement)
        return report.tagged("refine", details={"joint_sum_rate": joint.sum_rate})


class ZfScheme(BaseScheme):
    """ZF over a plain M-antenna array; the channel is drawn here from the direct stream."""

    layer_independent = True

    def __init__(self, scheme_name: str, num_antennas: int, settings: Optional[SchemeSettings] = None):
        super().__init__(scheme_name, settings)
        self.num_antennas = num_antennas

    def execute(self, context: TrialContext) -> RateReport:
        rng = stream(context.master_seed, StreamTag.DIRECT, self.num_antennas, context.trial)
        positions = antenna_array(context.config, self.num_antennas)
        channel = direct_channel(rng, positions, context.scenario)
        return zf_baseline(channel.h, channel.noise_power, context.total_power)


SCHEME_REGISTRY: Dict[str, Type[BaseScheme]] = {
    "joint": JointScheme,
    "average-pa": AveragePaScheme,
    "codebook": CodebookScheme,
    "zf-4ta": ZfScheme,
    "zf-8ta": ZfScheme,
    "refine": RefineScheme,
}

DEFAULT_SCHEMES = ("joint", "average-pa", "codebook", "zf-4ta", "zf-8ta")


def build_scheme(name: str, settings: Optional[SchemeSettings] = None) -> BaseScheme:
    """
    Instantiate a registered scheme.

    Raises:
        ValueError: Unknown scheme name
    """
    if name not in SCHEME_REGISTRY:
        raise ValueError(f"Unknown scheme '{name}'. Available: {sorted(SCHEME_REGISTRY)}")
    if SCHEME_REGISTRY[name] is ZfScheme:
        return ZfScheme(name, int(name[len("zf-"):-len("ta")]), settings)
    return SCHEME_REGISTRY[name](name, settings)
