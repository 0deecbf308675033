"""
DOA Samples
Radiating targets drawn uniformly over the square coverage area, labelled by
quadrant, with their free-space uplink to the outer SIM layer.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from src.physics.channel import los_uplink
from src.physics.geometry import Scenario, SimGeometry, quadrant_of


@dataclass(frozen=True, eq=False)
class DoaSample:
    """One target: ground position, quadrant label and uplink vector (N,)."""
    target_position: np.ndarray
    label: str
    uplink: np.ndarray


def make_sample(position, scenario: Scenario, geometry: SimGeometry) -> DoaSample:
    """
    Build a sample for a known position.

    Raises:
        ValueError: The position lies on a quadrant boundary
    """
    position = np.asarray(position, dtype=float)
    label = quadrant_of(position, scenario.coverage_center)
    if label is None:
        raise ValueError(f"target {position.tolist()} lies on a quadrant boundary")
    uplink = los_uplink(position, geometry.outer_layer, scenario.wavelength, geometry.layer_normal)
    return DoaSample(target_position=position, label=label, uplink=uplink)


def generate_samples(rng: np.random.Generator, scenario: Scenario, count: int,
                     geometry: SimGeometry) -> List[DoaSample]:
    """
    Draw `count` targets i.i.d. uniform over the coverage square at ground level.

    Draws inside the exclusion disk around the BS ground point, or exactly on an
    axis, are rejected and redrawn.

    Args:
        rng: Seeded generator (consumed)
        scenario: doa scenario
        count: Number of samples (>= 1)
        geometry: SIM geometry supplying the outer layer

    Returns:
        List of DoaSample
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if scenario.coverage_side is None:
        raise ValueError("generate_samples needs a doa scenario")

    cx, cy = scenario.coverage_center
    half = scenario.coverage_side / 2.0
    samples = []
    while len(samples) < count:
        x, y = rng.uniform(-half, half, size=2)
        position = np.array([cx + x, cy + y, 0.0])
        if np.hypot(position[0], position[1]) < scenario.exclusion_radius:
            continue
        if quadrant_of(position, scenario.coverage_center) is None:
            continue
        samples.append(make_sample(position, scenario, geometry))
    return samples


def stack_uplinks(samples: List[DoaSample]) -> np.ndarray:
    """S x N matrix of uplink rows."""
    return np.stack([sample.uplink for sample in samples])
