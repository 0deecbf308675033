"""
Unit Tests for SIM geometry and scenarios
"""

import math

import numpy as np
import pytest

from src.physics.geometry import (
    GeometryError,
    SimConfig,
    build_scenario,
    build_sim_geometry,
    quadrant_of,
)
from src.physics.units import SPEED_OF_LIGHT, dbm_to_mw, mw_to_dbm


class TestUnits:
    """dBm conversions."""

    def test_dbm_to_mw(self):
        assert dbm_to_mw(20.0) == pytest.approx(100.0)
        assert dbm_to_mw(-100.0) == pytest.approx(1e-10)
        assert dbm_to_mw(-np.inf) == 0.0

    def test_mw_to_dbm_inverts(self):
        assert mw_to_dbm(dbm_to_mw(-37.5)) == pytest.approx(-37.5)
        assert mw_to_dbm(0.0) == -np.inf


class TestSimConfig:
    """Defaults and validation of SimConfig."""

    def test_defaults_resolve_to_wavelength_multiples(self):
        config = SimConfig()
        wavelength = SPEED_OF_LIGHT / 28e9
        assert config.wavelength == pytest.approx(wavelength)
        assert config.sim_thickness == pytest.approx(5 * wavelength)
        assert config.element_spacing == pytest.approx(wavelength / 2)
        assert config.atom_area == pytest.approx((wavelength / 2) ** 2)

    def test_inter_layer_gap_seven_layers(self):
        config = SimConfig(num_layers=7, atoms_per_layer=49)
        assert config.inter_layer_gap == pytest.approx(7.65e-3, abs=1e-5)

    def test_non_square_atoms_rejected(self):
        with pytest.raises(GeometryError, match="perfect square"):
            SimConfig(atoms_per_layer=50)

    @pytest.mark.parametrize("field_name", ["num_layers", "num_antennas", "num_users"])
    def test_nonpositive_counts_rejected(self, field_name):
        with pytest.raises(GeometryError):
            SimConfig(**{field_name: 0})

    def test_nonpositive_lengths_rejected(self):
        with pytest.raises(GeometryError, match="sim_thickness"):
            SimConfig(sim_thickness=-1.0)

    def test_phase_levels_validated(self):
        with pytest.raises(GeometryError, match="phase_levels"):
            SimConfig(phase_levels=1)
        assert SimConfig(phase_levels=4).phase_levels == 4

    def test_to_dict_echoes_resolved_values(self):
        config = SimConfig(num_layers=3)
        data = config.to_dict()
        assert data["num_layers"] == 3
        assert data["sim_thickness"] == pytest.approx(config.sim_thickness)


class TestBuildSimGeometry:
    """Layer and antenna layout."""

    def test_single_atom_on_boresight(self):
        config = SimConfig(num_layers=1, atoms_per_layer=1)
        geometry = build_sim_geometry(config)
        atom = geometry.layer_positions[0, 0]
        assert atom[0] == pytest.approx(0.0)
        assert atom[1] == pytest.approx(0.0)
        assert config.bs_height - atom[2] == pytest.approx(config.sim_thickness)

    def test_shapes(self):
        config = SimConfig(num_layers=3, atoms_per_layer=9, num_antennas=4)
        geometry = build_sim_geometry(config)
        assert geometry.layer_positions.shape == (3, 9, 3)
        assert geometry.antenna_positions.shape == (4, 3)
        assert geometry.num_layers == 3
        assert geometry.atoms_per_layer == 9

    def test_layers_are_translated_copies(self):
        config = SimConfig(num_layers=2, atoms_per_layer=4)
        geometry = build_sim_geometry(config)
        shift = geometry.layer_positions[1] - geometry.layer_positions[0]
        expected = config.inter_layer_gap * geometry.layer_normal
        np.testing.assert_allclose(shift, np.tile(expected, (4, 1)), atol=1e-15)

    def test_antennas_half_wavelength_ula(self):
        config = SimConfig(num_antennas=4)
        geometry = build_sim_geometry(config)
        steps = np.diff(geometry.antenna_positions[:, 0])
        np.testing.assert_allclose(steps, config.wavelength / 2)
        assert geometry.antenna_positions[:, 0].mean() == pytest.approx(0.0)
        np.testing.assert_allclose(geometry.antenna_positions[:, 2], config.bs_height)

    def test_inter_layer_distances_at_least_gap(self):
        config = SimConfig(num_layers=2, atoms_per_layer=9)
        geometry = build_sim_geometry(config)
        first, second = geometry.layer_positions
        distances = np.linalg.norm(second[:, None, :] - first[None, :, :], axis=-1)
        assert distances.min() == pytest.approx(config.inter_layer_gap)
        coaxial = np.isclose(distances, config.inter_layer_gap)
        np.testing.assert_array_equal(coaxial, np.eye(9, dtype=bool))

    def test_positions_are_immutable_and_reproducible(self):
        config = SimConfig(num_layers=2, atoms_per_layer=4)
        first = build_sim_geometry(config)
        second = build_sim_geometry(config)
        np.testing.assert_array_equal(first.layer_positions, second.layer_positions)
        with pytest.raises(ValueError):
            first.layer_positions[0, 0, 0] = 1.0


class TestQuadrants:
    """Quadrant labelling, counter-clockwise from A."""

    @pytest.mark.parametrize("point,label", [
        ((10.0, 10.0), "A"),
        ((-10.0, 10.0), "B"),
        ((-10.0, -10.0), "C"),
        ((10.0, -10.0), "D"),
    ])
    def test_labels(self, point, label):
        assert quadrant_of(point) == label

    def test_axis_points_have_no_quadrant(self):
        assert quadrant_of((0.0, 5.0)) is None
        assert quadrant_of((5.0, 0.0)) is None

    def test_offset_center(self):
        assert quadrant_of((1.0, 1.0), center=(2.0, 2.0)) == "C"


class TestBuildScenario:
    """Multiuser and DOA scenarios."""

    def test_multiuser_defaults(self):
        scenario = build_scenario("multiuser", SimConfig())
        positions = scenario.user_positions
        assert positions.shape == (4, 3)
        np.testing.assert_allclose(np.diff(positions[:, 0]), 20.0)
        np.testing.assert_allclose(positions[:, 1], 50.0)
        np.testing.assert_allclose(positions[:, 2], 0.0)
        assert scenario.tx_power_dbm == 20.0
        assert scenario.noise_power_dbm == -100.0
        assert scenario.path_loss_exponent == 3.5

    def test_explicit_positions_echoed(self):
        positions = [[1.0, 30.0, 0.0], [-1.0, 40.0, 0.0]]
        scenario = build_scenario("multiuser", SimConfig(num_users=2), {"user_positions": positions})
        np.testing.assert_array_equal(scenario.user_positions, np.array(positions))

    def test_user_count_mismatch(self):
        with pytest.raises(GeometryError, match="num_users"):
            build_scenario("multiuser", SimConfig(num_users=4), {"user_positions": [[0.0, 50.0, 0.0]]})

    def test_unknown_override_key(self):
        with pytest.raises(GeometryError, match="Unknown multiuser"):
            build_scenario("multiuser", SimConfig(), {"users": 3})

    def test_unknown_kind(self):
        with pytest.raises(GeometryError, match="Unknown scenario kind"):
            build_scenario("uplink", SimConfig())

    def test_doa_quadrant_a_bounds(self):
        scenario = build_scenario("doa", SimConfig(atoms_per_layer=100))
        assert scenario.noise_power_dbm == -140.0
        assert scenario.quadrant_bounds("A") == ((0.0, 50.0), (0.0, 50.0))
        assert scenario.quadrant_bounds("C") == ((-50.0, 0.0), (-50.0, 0.0))

    def test_multiuser_has_no_quadrants(self):
        scenario = build_scenario("multiuser", SimConfig())
        with pytest.raises(GeometryError):
            scenario.quadrant_bounds("A")

    def test_wavelength_follows_config(self):
        config = SimConfig(carrier_frequency=10e9)
        scenario = build_scenario("multiuser", config)
        assert scenario.wavelength == pytest.approx(SPEED_OF_LIGHT / 10e9)
        assert math.isfinite(scenario.tx_power_dbm)
