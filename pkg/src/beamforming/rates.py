"""
Rate Evaluation
SINR / sum-rate through the SIM cascade and its exact gradient w.r.t. the phases.
Antenna k feeds the stream of user k (K = M).
"""

from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Tuple

import numpy as np

from src.physics.propagation import (
    PhaseState,
    TransferStack,
    cascade_gradient,
    sim_response,
)


LN2 = np.log(2.0)


class DimensionError(ValueError):
    """Raised when channel, response and allocation shapes disagree."""
    pass


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-stream transmit powers (linear mW) under the total budget P_T."""
    p: np.ndarray
    total_budget: float
    water_level: Optional[float] = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if np.any(p < 0):
            raise ValueError("powers must be non-negative")
        if p.sum() > self.total_budget * (1.0 + 1e-9):
            raise ValueError(f"allocation {p.sum()} exceeds budget {self.total_budget}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, num_streams: int, total_budget: float) -> "PowerAllocation":
        return cls(np.full(num_streams, total_budget / num_streams), total_budget)


@dataclass(frozen=True, eq=False)
class RateReport:
    """Per-user SINR and rate (bps/Hz) for one scheme run."""
    sinr: np.ndarray
    per_user_rate: np.ndarray
    sum_rate: float
    scheme: str = ""
    iterations: int = 0
    converged: bool = True
    phases: Optional[PhaseState] = None
    allocation: Optional[PowerAllocation] = None
    trace: Tuple[float, ...] = ()
    details: Dict[str, Any] = field(default_factory=dict)

    def tagged(self, scheme: str, **changes) -> "RateReport":
        """Copy with a new scheme tag (and optional field changes)."""
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes, scheme=scheme)
        return RateReport(**values)


def effective_matrix(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """
    End-to-end gains B = H G; B[k, m] couples antenna m to user k.

    Raises:
        DimensionError: Inner dimensions disagree
    """
    if h.shape[1] != g.shape[0]:
        raise DimensionError(f"cannot multiply H {h.shape} by G {g.shape}")
    return h @ g


def _check_square(b: np.ndarray, pa: PowerAllocation) -> None:
    if b.shape[-1] != b.shape[-2]:
        raise DimensionError(f"sum-rate needs K = M, got B of shape {b.shape}")
    if pa.p.shape[0] != b.shape[-1]:
        raise DimensionError(f"{pa.p.shape[0]} powers for {b.shape[-1]} streams")


def sum_rate(b: np.ndarray, pa: PowerAllocation, noise_power: float) -> RateReport:
    """
    sinr_k = p_k |B_kk|^2 / (sum_{i != k} p_i |B_ki|^2 + sigma^2), rate_k = log2(1 + sinr_k).

    Args:
        b: K x K effective matrix
        pa: Power allocation
        noise_power: sigma^2 in linear mW (> 0)
    """
    _check_square(b, pa)
    if not noise_power > 0:
        raise ValueError(f"noise power must be positive, got {noise_power}")
    received = np.abs(b) ** 2 * pa.p[None, :]
    signal = np.diag(received)
    interference = received.sum(axis=1) - signal + noise_power
    sinr = signal / interference
    rates = np.log2(1.0 + sinr)
    return RateReport(sinr=sinr, per_user_rate=rates, sum_rate=float(rates.sum()), allocation=pa)


def batch_sum_rate(b: np.ndarray, p: np.ndarray, noise_power: float) -> np.ndarray:
    """Sum-rates for a C x K x K batch of effective matrices under one allocation."""
    received = np.abs(b) ** 2 * p[None, None, :]
    signal = np.diagonal(received, axis1=1, axis2=2)
    interference = received.sum(axis=2) - signal + noise_power
    return np.log2(1.0 + signal / interference).sum(axis=1)


def sumrate_at(stack: TransferStack, phases: PhaseState, h: np.ndarray,
               pa: PowerAllocation, noise_power: float) -> RateReport:
    """Sum-rate report for a phase configuration."""
    report = sum_rate(effective_matrix(h, sim_response(stack, phases)), pa, noise_power)
    return report.tagged(report.scheme, phases=phases)


def sumrate_gradient(stack: TransferStack, phases: PhaseState, h: np.ndarray,
                     pa: PowerAllocation, noise_power: float) -> np.ndarray:
    """
    Exact d(sum_rate)/d(theta) (L x N) by the chain rule through the cascade.

    With T_k the total received power plus noise and I_k = T_k - signal_k,
    sum_rate = sum_k log2 T_k - log2 I_k, so each |B_ki|^2 carries the weight
    p_i (1/T_k - [i != k]/I_k) / ln 2.
    """
    b = effective_matrix(h, sim_response(stack, phases))
    _check_square(b, pa)
    received = np.abs(b) ** 2 * pa.p[None, :]
    total = received.sum(axis=1) + noise_power
    interference = total - np.diag(received)

    off_diagonal = 1.0 - np.eye(b.shape[0])
    weights = pa.p[None, :] * (1.0 / total[:, None] - off_diagonal / interference[:, None]) / LN2
    return cascade_gradient(stack, phases, h, weights * np.conj(b))
