"""
SIM Geometry
Builds the 3-D layout of the stacked metasurface (layers, meta-atoms, antennas)
and the multi-user / DOA scenarios placed around it.

Frame: the antenna array is a ULA along x at height bs_height, centred on the
z-axis. Layers are parallel square grids stacked below the array (normal -z,
i.e. parallel to the ground), layer 1 nearest the antennas.
"""

import math
from dataclasses import dataclass
from typing import Dict, Any, Optional, Tuple

import numpy as np

from src.physics.units import SPEED_OF_LIGHT


QUADRANT_LABELS = ("A", "B", "C", "D")


class GeometryError(ValueError):
    """Raised for an invalid SIM configuration or scenario."""
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SimConfig:
    """
    Physical description of an SIM transceiver.

    Optional lengths default to the half-wavelength / 5-wavelength values of the
    reference setup and are resolved on construction, so a SimConfig always
    echoes concrete numbers.
    """
    carrier_frequency: float = 28e9
    num_layers: int = 1
    atoms_per_layer: int = 49
    num_antennas: int = 4
    num_users: int = 4
    sim_thickness: Optional[float] = None
    element_spacing: Optional[float] = None
    atom_area: Optional[float] = None
    bs_height: float = 10.0
    phase_levels: Optional[int] = None  # None = continuous

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise GeometryError(f"carrier_frequency must be positive, got {self.carrier_frequency}")
        for name in ("num_layers", "atoms_per_layer", "num_antennas", "num_users"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise GeometryError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))
        side = math.isqrt(int(self.atoms_per_layer))
        if side * side != self.atoms_per_layer:
            raise GeometryError(
                f"atoms_per_layer must be a perfect square, got {self.atoms_per_layer}"
            )
        if self.phase_levels is not None and self.phase_levels < 2:
            raise GeometryError(f"phase_levels must be >= 2 or None, got {self.phase_levels}")

        wavelength = self.wavelength
        defaults = {
            "sim_thickness": 5.0 * wavelength,
            "element_spacing": wavelength / 2.0,
            "atom_area": (wavelength / 2.0) ** 2,
        }
        for name, default in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, default)
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def grid_side(self) -> int:
        return math.isqrt(self.atoms_per_layer)

    @property
    def inter_layer_gap(self) -> float:
        return self.sim_thickness / self.num_layers

    @property
    def propagation_delay(self) -> float:
        """Time for the wave to traverse the stack (the wave-domain processing latency)."""
        return self.sim_thickness / SPEED_OF_LIGHT

    def to_dict(self) -> Dict[str, Any]:
        return {
            "carrier_frequency": self.carrier_frequency,
            "num_layers": self.num_layers,
            "atoms_per_layer": self.atoms_per_layer,
            "num_antennas": self.num_antennas,
            "num_users": self.num_users,
            "sim_thickness": self.sim_thickness,
            "element_spacing": self.element_spacing,
            "atom_area": self.atom_area,
            "bs_height": self.bs_height,
            "phase_levels": self.phase_levels,
        }


@dataclass(frozen=True, eq=False)
class SimGeometry:
    """Positions (metres) of every meta-atom and antenna."""
    layer_positions: np.ndarray     # (L, N, 3)
    antenna_positions: np.ndarray   # (M, 3)
    layer_normal: np.ndarray        # (3,)
    inter_layer_gap: float

    @property
    def num_layers(self) -> int:
        return self.layer_positions.shape[0]

    @property
    def atoms_per_layer(self) -> int:
        return self.layer_positions.shape[1]

    @property
    def outer_layer(self) -> np.ndarray:
        """Free-space-side layer (layer L)."""
        return self.layer_positions[-1]

    @property
    def outer_centroid(self) -> np.ndarray:
        return self.layer_positions[-1].mean(axis=0)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Placement of users (multiuser) or of the coverage square (doa) plus link budget."""
    kind: str
    wavelength: float
    tx_power_dbm: float
    noise_power_dbm: float
    path_loss_exponent: float
    user_positions: Optional[np.ndarray] = None   # (K, 3), multiuser only
    coverage_side: Optional[float] = None         # doa only
    coverage_center: Tuple[float, float] = (0.0, 0.0)
    exclusion_radius: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.tx_power_dbm) and np.isfinite(self.noise_power_dbm)):
            raise GeometryError("tx_power_dbm and noise_power_dbm must be finite")

    @property
    def num_users(self) -> int:
        return 0 if self.user_positions is None else self.user_positions.shape[0]

    def quadrant_bounds(self, label: str) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """((x_min, x_max), (y_min, y_max)) of a quadrant of the coverage square."""
        if self.coverage_side is None:
            raise GeometryError("quadrants are only defined for doa scenarios")
        cx, cy = self.coverage_center
        half = self.coverage_side / 2.0
        x_side = (cx, cx + half) if label in ("A", "D") else (cx - half, cx)
        y_side = (cy, cy + half) if label in ("A", "B") else (cy - half, cy)
        return x_side, y_side


def quadrant_of(point, center: Tuple[float, float] = (0.0, 0.0)) -> Optional[str]:
    """
    Quadrant label of a ground point, counter-clockwise from A = {x>0, y>0}.
    Points on either axis belong to no quadrant (None).
    """
    dx = point[0] - center[0]
    dy = point[1] - center[1]
    if dx == 0 or dy == 0:
        return None
    if dy > 0:
        return "A" if dx > 0 else "B"
    return "C" if dx < 0 else "D"


def _ula(num_elements: int, spacing: float, height: float) -> np.ndarray:
    offsets = (np.arange(num_elements) - (num_elements - 1) / 2.0) * spacing
    positions = np.zeros((num_elements, 3))
    positions[:, 0] = offsets
    positions[:, 2] = height
    return positions


def build_sim_geometry(config: SimConfig) -> SimGeometry:
    """
    Lay out L parallel square grids below a uniform linear antenna array.

    Args:
        config: Validated SIM configuration

    Returns:
        SimGeometry with layer l at distance l * inter_layer_gap from the array plane
    """
    side = config.grid_side
    spacing = config.element_spacing
    gap = config.inter_layer_gap
    normal = np.array([0.0, 0.0, -1.0])

    offsets = (np.arange(side) - (side - 1) / 2.0) * spacing
    grid_y, grid_x = np.meshgrid(offsets, offsets, indexing="ij")
    grid = np.stack([grid_x.ravel(), grid_y.ravel(), np.zeros(side * side)], axis=1)

    antenna_plane = np.array([0.0, 0.0, config.bs_height])
    layers = np.stack([
        grid + antenna_plane + (l + 1) * gap * normal
        for l in range(config.num_layers)
    ])

    return SimGeometry(
        layer_positions=_frozen(layers),
        antenna_positions=_frozen(_ula(config.num_antennas, spacing, config.bs_height)),
        layer_normal=_frozen(normal),
        inter_layer_gap=gap,
    )


def antenna_array(config: SimConfig, num_antennas: int) -> np.ndarray:
    """Antenna positions of a plain ULA (no SIM) of the given size, used by the ZF baselines."""
    return _frozen(_ula(num_antennas, config.element_spacing, config.bs_height))


_MULTIUSER_DEFAULTS = {
    "tx_power_dbm": 20.0,
    "noise_power_dbm": -100.0,
    "path_loss_exponent": 3.5,
    "standoff": 50.0,
    "user_spacing": 20.0,
}

_DOA_DEFAULTS = {
    "tx_power_dbm": 20.0,
    "noise_power_dbm": -140.0,
    "path_loss_exponent": 2.0,
    "coverage_side": 100.0,
    "coverage_center": (0.0, 0.0),
    "exclusion_radius": 1.0,
}


def build_scenario(kind: str, config: SimConfig, overrides: Optional[Dict[str, Any]] = None) -> Scenario:
    """
    Place users (multiuser) or the coverage square (doa) around the BS.

    Args:
        kind: "multiuser" or "doa"
        config: SIM configuration (supplies K and the wavelength)
        overrides: Optional scenario keys replacing the defaults

    Returns:
        Scenario

    Raises:
        GeometryError: Unknown kind, unknown override key, or K != len(user_positions)
    """
    overrides = dict(overrides or {})

    if kind == "multiuser":
        unknown = set(overrides) - set(_MULTIUSER_DEFAULTS) - {"user_positions"}
        if unknown:
            raise GeometryError(f"Unknown multiuser scenario keys: {sorted(unknown)}")
        params = {**_MULTIUSER_DEFAULTS, **overrides}

        if params.get("user_positions") is not None:
            positions = np.array(params["user_positions"], dtype=float)
            if positions.ndim != 2 or positions.shape[1] != 3:
                raise GeometryError("user_positions must be a list of 3-D points")
            if positions.shape[0] != config.num_users:
                raise GeometryError(
                    f"num_users is {config.num_users} but {positions.shape[0]} user positions were given"
                )
        else:
            k = config.num_users
            positions = np.zeros((k, 3))
            positions[:, 0] = (np.arange(k) - (k - 1) / 2.0) * params["user_spacing"]
            positions[:, 1] = params["standoff"]

        return Scenario(
            kind=kind,
            wavelength=config.wavelength,
            tx_power_dbm=float(params["tx_power_dbm"]),
            noise_power_dbm=float(params["noise_power_dbm"]),
            path_loss_exponent=float(params["path_loss_exponent"]),
            user_positions=_frozen(positions),
        )

    if kind == "doa":
        unknown = set(overrides) - set(_DOA_DEFAULTS)
        if unknown:
            raise GeometryError(f"Unknown doa scenario keys: {sorted(unknown)}")
        params = {**_DOA_DEFAULTS, **overrides}
        if not params["coverage_side"] > 0:
            raise GeometryError(f"coverage_side must be positive, got {params['coverage_side']}")
        return Scenario(
            kind=kind,
            wavelength=config.wavelength,
            tx_power_dbm=float(params["tx_power_dbm"]),
            noise_power_dbm=float(params["noise_power_dbm"]),
            path_loss_exponent=float(params["path_loss_exponent"]),
            coverage_side=float(params["coverage_side"]),
            coverage_center=tuple(float(c) for c in params["coverage_center"]),
            exclusion_radius=float(params["exclusion_radius"]),
        )

    raise GeometryError(f"Unknown scenario kind '{kind}' (expected 'multiuser' or 'doa')")
