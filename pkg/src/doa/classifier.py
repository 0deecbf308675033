"""
DOA Quadrant Classifier
The SIM in receive orientation maps a target's uplink onto the antenna array;
the antenna with the largest energy names the target's quadrant.

Receive direction: y = W1^T Phi1 W2^T Phi2 ... WL^T PhiL u = G^T u, so a batch
of uplink rows U gives Y = sqrt(P) U G.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.doa.dataset import DoaSample, stack_uplinks
from src.physics.geometry import QUADRANT_LABELS, SimConfig, SimGeometry, build_sim_geometry
from src.physics.propagation import (
    PhaseState,
    TransferStack,
    build_transfer_stack,
    cascade_gradient,
    sim_response,
)
from src.physics.units import dbm_to_mw


logger = logging.getLogger(__name__)

DEFAULT_ANTENNA_MAP = {"A": 0, "B": 1, "C": 2, "D": 3}
DEFAULT_TX_POWER_DBM = 20.0
DEFAULT_NOISE_POWER_DBM = -140.0
MODEL_HEADER = "# sim-phases"


class ModelFileError(ValueError):
    """Raised for a malformed phase model file."""
    pass


@dataclass(frozen=True, eq=False)
class DoaModel:
    """Trainable phases, the fixed receive-side stack and the quadrant -> antenna bijection."""
    phases: PhaseState
    stack: TransferStack
    antenna_map: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_ANTENNA_MAP))

    def __post_init__(self):
        if self.phases.shape != (self.stack.num_layers, self.stack.atoms_per_layer):
            raise ValueError(f"phases {self.phases.shape} do not match the stack")
        if sorted(self.antenna_map) != list(QUADRANT_LABELS):
            raise ValueError(f"antenna_map must cover quadrants {QUADRANT_LABELS}")
        if sorted(self.antenna_map.values()) != list(range(self.stack.num_antennas)) or self.stack.num_antennas != 4:
            raise ValueError("antenna_map must be a bijection onto 4 antennas")

    def with_phases(self, phases: PhaseState) -> "DoaModel":
        return DoaModel(phases=phases, stack=self.stack, antenna_map=self.antenna_map)

    def label_of(self, antenna: int) -> str:
        for label, index in self.antenna_map.items():
            if index == antenna:
                return label
        raise KeyError(antenna)


def build_doa_model(config: SimConfig, phases: Optional[PhaseState] = None,
                    rng: Optional[np.random.Generator] = None) -> Tuple[DoaModel, SimGeometry]:
    """
    Geometry and model for a receive-side SIM; phases default to Uniform[0, 2 pi) from rng, else zeros.
    """
    geometry = build_sim_geometry(config)
    stack = build_transfer_stack(geometry, config)
    if phases is None:
        phases = (PhaseState.random(rng, config.num_layers, config.atoms_per_layer) if rng is not None
                  else PhaseState.zeros(config.num_layers, config.atoms_per_layer))
    return DoaModel(phases=phases, stack=stack), geometry


def received_field(model: DoaModel, uplinks: np.ndarray, tx_power_dbm: float = DEFAULT_TX_POWER_DBM) -> np.ndarray:
    """Noiseless antenna signals Y (S x M) for uplink rows U (S x N)."""
    uplinks = np.atleast_2d(uplinks)
    if uplinks.shape[1] != model.stack.atoms_per_layer:
        raise ValueError(f"uplink length {uplinks.shape[1]} != atoms per layer {model.stack.atoms_per_layer}")
    return math.sqrt(dbm_to_mw(tx_power_dbm)) * (uplinks @ sim_response(model.stack, model.phases))


def _add_noise(y: np.ndarray, noise_power_dbm: float, rng: Optional[np.random.Generator]) -> np.ndarray:
    sigma2 = dbm_to_mw(noise_power_dbm)
    if rng is None or sigma2 == 0.0:
        return y
    noise = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) * math.sqrt(sigma2 / 2.0)
    return y + noise


def readout(model: DoaModel, sample: DoaSample, tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
            noise_power_dbm: float = DEFAULT_NOISE_POWER_DBM,
            rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Antenna energies e_m = |y_m|^2 for one target.

    Complex Gaussian noise of power sigma^2 per antenna is added when an rng is
    given; noise_power_dbm = -inf (or rng=None) gives deterministic energies.
    """
    y = received_field(model, sample.uplink[None, :], tx_power_dbm)[0]
    return np.abs(_add_noise(y, noise_power_dbm, rng)) ** 2


def batch_energies(model: DoaModel, samples: List[DoaSample], tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
                   noise_power_dbm: float = DEFAULT_NOISE_POWER_DBM,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """S x M energies; noise draws are consumed in sample order."""
    y = received_field(model, stack_uplinks(samples), tx_power_dbm)
    return np.abs(_add_noise(y, noise_power_dbm, rng)) ** 2


def predict(model: DoaModel, energies: np.ndarray) -> Optional[str]:
    """Quadrant of the strongest antenna, or None on a tie."""
    peak = np.max(energies)
    winners = np.flatnonzero(energies == peak)
    if winners.size != 1:
        return None
    return model.label_of(int(winners[0]))


def one_hot_targets(labels: List[str], antenna_map: Dict[str, int]) -> np.ndarray:
    targets = np.zeros((len(labels), len(antenna_map)))
    targets[np.arange(len(labels)), [antenna_map[label] for label in labels]] = 1.0
    return targets


def doa_loss(energies: np.ndarray, label: str, antenna_map: Optional[Dict[str, int]] = None) -> float:
    """
    ||e / sum(e) - onehot(label)||^2 / 4.

    Raises:
        ValueError: All energies are zero
    """
    energies = np.asarray(energies, dtype=float)
    total = energies.sum()
    if not total > 0:
        raise ValueError("doa_loss needs a positive total energy")
    target = one_hot_targets([label], antenna_map or DEFAULT_ANTENNA_MAP)[0]
    return float(np.sum((energies / total - target) ** 2) / 4.0)


def batch_loss(model: DoaModel, uplinks: np.ndarray, targets: np.ndarray,
               tx_power_dbm: float = DEFAULT_TX_POWER_DBM) -> float:
    """Mean noiseless loss over a batch of uplink rows and one-hot targets."""
    energies = np.abs(received_field(model, uplinks, tx_power_dbm)) ** 2
    normalized = energies / energies.sum(axis=1, keepdims=True)
    return float(np.mean(np.sum((normalized - targets) ** 2, axis=1) / 4.0))


def doa_loss_gradient(model: DoaModel, uplinks: np.ndarray, targets: np.ndarray,
                      tx_power_dbm: float = DEFAULT_TX_POWER_DBM) -> Tuple[float, np.ndarray]:
    """
    Mean noiseless batch loss and its exact gradient w.r.t. theta (L x N).

    With s = sum(e) and e_hat = e / s, dloss/de_m = ((e_hat_m - t_m) - sum_j (e_hat_j - t_j) e_hat_j) / (2 s)
    and de_m = 2 Re(conj(y_m) dy_m).

    Args:
        model: Current model
        uplinks: S x N uplink rows
        targets: S x 4 one-hot rows (antenna order)
        tx_power_dbm: Target transmit power

    Returns:
        (mean loss, gradient)
    """
    left = math.sqrt(dbm_to_mw(tx_power_dbm)) * np.atleast_2d(uplinks)
    y = left @ sim_response(model.stack, model.phases)
    energies = np.abs(y) ** 2
    total = energies.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("a sample receives zero energy")
    normalized = energies / total
    error = normalized - targets
    loss = float(np.mean(np.sum(error ** 2, axis=1) / 4.0))

    d_energy = (error - np.sum(error * normalized, axis=1, keepdims=True)) / (2.0 * total)
    sensitivity = d_energy * np.conj(y) / y.shape[0]
    return loss, cascade_gradient(model.stack, model.phases, left, sensitivity)


def evaluate(model: DoaModel, samples: List[DoaSample], rng: Optional[np.random.Generator] = None,
             tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
             noise_power_dbm: float = DEFAULT_NOISE_POWER_DBM) -> float:
    """
    Fraction of samples whose strongest antenna maps to the true quadrant (ties are errors).

    Args:
        model: Model to score
        samples: Non-empty sample list
        rng: Noise generator; None evaluates noiselessly
    """
    if not samples:
        raise ValueError("evaluate needs at least one sample")
    energies = batch_energies(model, samples, tx_power_dbm, noise_power_dbm, rng)
    hits = sum(predict(model, row) == sample.label for row, sample in zip(energies, samples))
    return hits / len(samples)


def save_phases(path, phases: PhaseState) -> Path:
    """Write `# sim-phases L=<L> N=<N>` then one line of N %.17g values per layer."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    num_layers, atoms = phases.shape
    lines = [f"{MODEL_HEADER} L={num_layers} N={atoms}"]
    lines += [" ".join("%.17g" % value for value in row) for row in phases.theta]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def load_phases(path) -> PhaseState:
    """
    Read a phase model file written by save_phases.

    Raises:
        ModelFileError: Bad header, wrong row count or wrong row length
    """
    path = Path(path)
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines or not lines[0].startswith(MODEL_HEADER):
        raise ModelFileError(f"{path}: missing '{MODEL_HEADER}' header")
    try:
        fields = dict(token.split("=", 1) for token in lines[0][len(MODEL_HEADER):].split())
        num_layers, atoms = int(fields["L"]), int(fields["N"])
        rows = [[float(value) for value in line.split()] for line in lines[1:]]
    except (KeyError, ValueError) as e:
        raise ModelFileError(f"{path}: cannot parse model file ({e})") from e
    if len(rows) != num_layers or any(len(row) != atoms for row in rows):
        raise ModelFileError(f"{path}: expected {num_layers} rows of {atoms} values")
    return PhaseState(np.array(rows))
