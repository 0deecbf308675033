"""
Wireless Channel Generation
Correlated Rayleigh fading (outer SIM layer -> users, antenna array -> users)
with distance path loss, plus free-space line-of-sight uplinks for DOA.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from src.physics.geometry import Scenario, SimGeometry
from src.physics.units import dbm_to_mw


logger = logging.getLogger(__name__)

EIGEN_CLAMP_TOLERANCE = 1e-10


class ChannelError(ValueError):
    """Raised for invalid link geometry (distance below the 1 m reference)."""
    pass


class CorrelationError(ArithmeticError):
    """Raised when a correlation matrix is not positive semidefinite within tolerance."""
    pass


@dataclass(frozen=True, eq=False)
class CorrelationModel:
    """Spatial correlation R and its principal square root."""
    r: np.ndarray
    sqrt_r: np.ndarray


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Fading matrix h (K x N or K x M), noise power (linear mW) and per-user path loss."""
    h: np.ndarray
    noise_power: float
    per_user_pathloss: np.ndarray

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ChannelError(f"noise power must be positive, got {self.noise_power}")
        if not np.all(np.isfinite(self.h)):
            raise ChannelError("channel contains non-finite entries")


def path_loss(distance: float, exponent: float, wavelength: float) -> float:
    """
    Linear power gain: free-space gain (lambda / 4 pi)^2 at the 1 m reference,
    then distance^(-exponent) decay.

    Raises:
        ChannelError: distance < 1 m
    """
    if distance < 1.0:
        raise ChannelError(f"distance {distance} m is below the 1 m path-loss reference")
    return (wavelength / (4.0 * np.pi)) ** 2 * distance ** (-exponent)


def spatial_correlation(positions: np.ndarray, wavelength: float) -> CorrelationModel:
    """
    Isotropic-scattering correlation R[i, j] = sinc(2 d_ij / lambda).

    Raises:
        CorrelationError: An eigenvalue is more negative than the clamp tolerance
    """
    positions = np.asarray(positions, dtype=float)
    distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    r = np.sinc(2.0 * distances / wavelength)

    try:
        eigenvalues, eigenvectors = linalg.eigh(r)
    except linalg.LinAlgError as e:
        raise CorrelationError(f"eigendecomposition of the correlation matrix failed: {e}") from e

    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if eigenvalues.min() < -EIGEN_CLAMP_TOLERANCE * scale:
        raise CorrelationError(f"correlation matrix is not PSD (min eigenvalue {eigenvalues.min():.3e})")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    sqrt_r = (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.T
    return CorrelationModel(r=r, sqrt_r=sqrt_r)


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_fading(rng: np.random.Generator, corr: CorrelationModel, pathloss,
                  noise_power: float = 1.0) -> ChannelRealization:
    """
    Draw h with rows sqrt(pathloss_k) * (R^{1/2} z_k)^T, z_k ~ CN(0, I).

    Args:
        rng: Seeded generator (consumed)
        corr: Correlation model over the radiating aperture
        pathloss: K linear gains
        noise_power: Receiver noise power in linear mW

    Returns:
        ChannelRealization
    """
    pathloss = np.asarray(pathloss, dtype=float)
    z = _complex_gaussian(rng, (pathloss.shape[0], corr.r.shape[0]))
    h = np.sqrt(pathloss)[:, None] * (z @ corr.sqrt_r.T)
    return ChannelRealization(h=h, noise_power=noise_power, per_user_pathloss=pathloss)


def _user_pathloss(origin: np.ndarray, scenario: Scenario) -> np.ndarray:
    distances = np.linalg.norm(scenario.user_positions - origin, axis=1)
    return np.array([
        path_loss(d, scenario.path_loss_exponent, scenario.wavelength) for d in distances
    ])


def sim_user_channel(rng: np.random.Generator, geometry: SimGeometry, scenario: Scenario,
                     corr: Optional[CorrelationModel] = None) -> ChannelRealization:
    """Fading from the outer SIM layer to the users (path loss from the outer-layer centroid)."""
    if corr is None:
        corr = spatial_correlation(geometry.outer_layer, scenario.wavelength)
    pathloss = _user_pathloss(geometry.outer_centroid, scenario)
    return sample_fading(rng, corr, pathloss, noise_power=dbm_to_mw(scenario.noise_power_dbm))


def direct_channel(rng: np.random.Generator, antenna_positions: np.ndarray,
                   scenario: Scenario) -> ChannelRealization:
    """Fading from a plain antenna array (no SIM) to the users, for the ZF baselines."""
    antenna_positions = np.asarray(antenna_positions, dtype=float)
    corr = spatial_correlation(antenna_positions, scenario.wavelength)
    pathloss = _user_pathloss(antenna_positions.mean(axis=0), scenario)
    return sample_fading(rng, corr, pathloss, noise_power=dbm_to_mw(scenario.noise_power_dbm))


def los_uplink(target, outer_layer_positions: np.ndarray, wavelength: float,
               normal: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Free-space spherical wavefront from a radiating target to each outer-layer atom:
    entry n = (lambda / (4 pi d_n)) * exp(-j 2 pi d_n / lambda).

    Args:
        target: 3-D target position
        outer_layer_positions: N x 3 atom positions
        wavelength: Carrier wavelength
        normal: Optional layer normal; when given the target must lie on its far side

    Raises:
        ChannelError: Some d_n < 1 m, or target behind the SIM plane
    """
    offsets = np.asarray(target, dtype=float)[None, :] - np.asarray(outer_layer_positions, dtype=float)
    distances = np.linalg.norm(offsets, axis=1)
    if np.any(distances < 1.0):
        raise ChannelError("target closer than 1 m to the SIM")
    if normal is not None and np.any(offsets @ np.asarray(normal, dtype=float) <= 0.0):
        raise ChannelError("target is not in front of the SIM")
    return (wavelength / (4.0 * np.pi * distances)) * np.exp(-1j * 2.0 * np.pi * distances / wavelength)
