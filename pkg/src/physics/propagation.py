"""
Wave Propagation Through the SIM
Rayleigh-Sommerfeld inter-layer coefficients, the programmable cascade
G = Phi^L W^L ... Phi^1 W^1, its exact phase gradient, and phase quantization.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.physics.geometry import SimConfig, SimGeometry


TWO_PI = 2.0 * np.pi


class PropagationError(ValueError):
    """Raised for invalid diffraction geometry or mismatched cascade dimensions."""
    pass


def _wrap(theta: np.ndarray) -> np.ndarray:
    wrapped = np.mod(theta, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Per-atom phase shifts theta (L x N radians), stored wrapped to [0, 2*pi)."""
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2:
            raise PropagationError(f"theta must be an L x N array, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise PropagationError("theta contains non-finite values")
        theta = _wrap(theta)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, num_layers: int, atoms_per_layer: int) -> "PhaseState":
        return cls(np.zeros((num_layers, atoms_per_layer)))

    @classmethod
    def random(cls, rng: np.random.Generator, num_layers: int, atoms_per_layer: int) -> "PhaseState":
        return cls(rng.uniform(0.0, TWO_PI, size=(num_layers, atoms_per_layer)))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.theta.shape

    @property
    def coefficients(self) -> np.ndarray:
        """Unit-modulus transmission coefficients e^{j theta}."""
        return np.exp(1j * self.theta)


@dataclass(frozen=True, eq=False)
class TransferStack:
    """Fixed inter-layer matrices: matrices[0] = W^1 (N x M), matrices[l] = W^{l+1} (N x N)."""
    matrices: Tuple[np.ndarray, ...]
    wavelength: float

    @property
    def w1(self) -> np.ndarray:
        return self.matrices[0]

    @property
    def num_layers(self) -> int:
        return len(self.matrices)

    @property
    def atoms_per_layer(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def num_antennas(self) -> int:
        return self.matrices[0].shape[1]


def rs_coefficient(src, dst, normal, atom_area: float, wavelength: float) -> complex:
    """
    Rayleigh-Sommerfeld coupling from a secondary source at src to a point dst.

    w = (A_t cos(chi) / r) * (1 / (2 pi r) - j / lambda) * exp(j 2 pi r / lambda)

    Raises:
        PropagationError: Coincident points or backward propagation (cos(chi) <= 0)
    """
    dx = [float(d) - float(s) for s, d in zip(src, dst)]
    r = math.sqrt(sum(c * c for c in dx))
    if r == 0.0:
        raise PropagationError("Source and destination coincide (r = 0)")
    cos_chi = sum(c * n for c, n in zip(dx, normal)) / r
    if cos_chi <= 0.0:
        raise PropagationError(f"Backward propagation rejected (cos chi = {cos_chi:.3g})")
    amplitude = atom_area * cos_chi / r
    return amplitude * complex(1.0 / (TWO_PI * r), -1.0 / wavelength) * complex(
        math.cos(TWO_PI * r / wavelength), math.sin(TWO_PI * r / wavelength)
    )


def rs_matrix(src_points: np.ndarray, dst_points: np.ndarray, normal: np.ndarray,
              atom_area: float, wavelength: float) -> np.ndarray:
    """
    Vectorised rs_coefficient: entry [d, s] couples src_points[s] to dst_points[d].

    Returns:
        Complex matrix of shape (len(dst_points), len(src_points))
    """
    diff = np.asarray(dst_points, dtype=float)[:, None, :] - np.asarray(src_points, dtype=float)[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise PropagationError("Source and destination coincide (r = 0)")
    cos_chi = (diff @ np.asarray(normal, dtype=float)) / r
    if np.any(cos_chi <= 0.0):
        raise PropagationError("Backward propagation rejected (cos chi <= 0)")
    return (atom_area * cos_chi / r) * (1.0 / (TWO_PI * r) - 1j / wavelength) * np.exp(1j * TWO_PI * r / wavelength)


def build_transfer_stack(geom: SimGeometry, config: SimConfig) -> TransferStack:
    """
    Derive W^1 (antennas -> layer 1) and W^l (layer l-1 -> layer l) from the geometry.

    Args:
        geom: SIM geometry
        config: Configuration supplying atom area and wavelength

    Returns:
        Immutable TransferStack
    """
    wavelength = config.wavelength
    sources = [geom.antenna_positions] + [geom.layer_positions[l] for l in range(geom.num_layers - 1)]
    matrices = []
    for l in range(geom.num_layers):
        w = rs_matrix(sources[l], geom.layer_positions[l], geom.layer_normal, config.atom_area, wavelength)
        w.setflags(write=False)
        matrices.append(w)
    return TransferStack(matrices=tuple(matrices), wavelength=wavelength)


def _check_dimensions(stack: TransferStack, phases: PhaseState) -> None:
    if phases.shape != (stack.num_layers, stack.atoms_per_layer):
        raise PropagationError(
            f"PhaseState shape {phases.shape} does not match stack "
            f"({stack.num_layers} layers x {stack.atoms_per_layer} atoms)"
        )


def _forward(stack: TransferStack, coefficients: np.ndarray) -> List[np.ndarray]:
    """Layer inputs U_l = W^l A_{l-1} (A_0 = I); A_l = diag(v_l) U_l."""
    inputs = []
    propagated = None
    for l, w in enumerate(stack.matrices):
        u = w if propagated is None else w @ propagated
        inputs.append(u)
        propagated = coefficients[l][:, None] * u
    return inputs


def sim_response(stack: TransferStack, phases: PhaseState) -> np.ndarray:
    """
    End-to-end SIM response G (rows: outer-layer atoms, columns: antennas).

    Raises:
        PropagationError: Phase dimensions do not match the stack
    """
    _check_dimensions(stack, phases)
    coefficients = phases.coefficients
    inputs = _forward(stack, coefficients)
    return coefficients[-1][:, None] * inputs[-1]


def batch_response(stack: TransferStack, theta: np.ndarray) -> np.ndarray:
    """
    Responses for a batch of phase configurations.

    Args:
        stack: Transfer matrices
        theta: C x L x N phases

    Returns:
        C x N x M complex responses
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 3 or theta.shape[1:] != (stack.num_layers, stack.atoms_per_layer):
        raise PropagationError(f"theta batch shape {theta.shape} does not match stack")
    coefficients = np.exp(1j * theta)
    propagated = coefficients[:, 0, :, None] * stack.w1[None, :, :]
    for l in range(1, stack.num_layers):
        propagated = coefficients[:, l, :, None] * np.matmul(stack.matrices[l], propagated)
    return propagated


def cascade_gradient(stack: TransferStack, phases: PhaseState,
                     left: np.ndarray, sensitivity: np.ndarray) -> np.ndarray:
    """
    Exact gradient w.r.t. theta of a real objective f(B), B = left @ G.

    Args:
        stack: Transfer matrices
        phases: Point of evaluation
        left: K x N matrix applied after the cascade (user channel or uplink rows)
        sensitivity: K x M matrix Z with df = 2 Re sum(Z * dB)

    Returns:
        L x N real gradient
    """
    _check_dimensions(stack, phases)
    coefficients = phases.coefficients
    inputs = _forward(stack, coefficients)
    if left.shape[1] != stack.atoms_per_layer or sensitivity.shape != (left.shape[0], stack.num_antennas):
        raise PropagationError(
            f"left {left.shape} / sensitivity {sensitivity.shape} incompatible with stack"
        )

    grad = np.empty(phases.shape)
    backward = np.asarray(left, dtype=complex)
    for l in range(stack.num_layers - 1, -1, -1):
        projected = sensitivity @ inputs[l].T          # K x N
        grad[l] = -2.0 * np.imag(coefficients[l] * np.sum(backward * projected, axis=0))
        if l > 0:
            backward = (backward * coefficients[l][None, :]) @ stack.matrices[l]
    return grad


def quantize_phases(phases: PhaseState, levels: int) -> PhaseState:
    """
    Map each theta to the nearest of {2 pi k / levels}, ties toward the smaller k.

    Raises:
        PropagationError: levels < 2
    """
    if int(levels) != levels or levels < 2:
        raise PropagationError(f"levels must be an integer >= 2, got {levels}")
    step = TWO_PI / levels
    k = np.ceil(phases.theta / step - 0.5)
    k = np.mod(k, levels)
    return PhaseState(k * step)
