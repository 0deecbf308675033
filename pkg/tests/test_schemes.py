"""
Unit Tests for the multiuser beamforming schemes
"""

import numpy as np
import pytest

from sim_helpers import make_stack, random_channel
from src.beamforming.optimizer import WbfOptions
from src.beamforming.rates import PowerAllocation, batch_sum_rate, effective_matrix
from src.beamforming.schemes import (
    DEFAULT_SCHEMES,
    AveragePaScheme,
    CodebookScheme,
    JointScheme,
    RankDeficientChannelError,
    SchemeSettings,
    TrialContext,
    ZfScheme,
    average_pa_scheme,
    build_scheme,
    codebook_scheme,
    generate_codebook,
    joint_optimize,
    quantized_report,
    zf_baseline,
)
from src.beamforming.waterfilling import stream_interference, waterfill_fixed_point
from src.physics.channel import ChannelError, sim_user_channel, spatial_correlation
from src.physics.geometry import build_scenario
from src.physics.propagation import batch_response, sim_response
from src.physics.units import dbm_to_mw
from src.utils.rng import StreamTag, stream


FAST = WbfOptions(max_iters=40, restarts=2)


def _instance(seed, layers=2, atoms=4, users=2):
    rng = np.random.default_rng(seed)
    _, _, stack = make_stack(layers, atoms, users)
    h = random_channel(rng, users, atoms)
    return stack, h, 1e-3, 1.0


def _context(layers=1, atoms=4, trial=0, seed=0, phase_levels=None):
    config, geometry, stack = make_stack(layers, atoms, 4, phase_levels=phase_levels)
    scenario = build_scenario("multiuser", config)
    corr = spatial_correlation(geometry.outer_layer, scenario.wavelength)
    channel = sim_user_channel(stream(seed, StreamTag.CHANNEL, trial), geometry, scenario, corr)
    return TrialContext(config=config, scenario=scenario, stack=stack, channel=channel, master_seed=seed,
                        trial=trial, total_power=dbm_to_mw(scenario.tx_power_dbm))


class TestJointOptimize:
    """Alternating PA + WBF."""

    @pytest.mark.parametrize("seed", range(100))
    def test_outer_trace_non_decreasing(self, seed):
        stack, h, noise, power = _instance(seed)
        report = joint_optimize(stack, h, noise, power, FAST, np.random.default_rng(seed))
        assert report.scheme == "joint"
        assert np.all(np.diff(report.trace) >= 0)
        assert report.details["rounds"] == len(report.trace)
        assert report.allocation.p.sum() == pytest.approx(power)

    @pytest.mark.parametrize("seed", range(5))
    def test_dominates_average_pa_on_same_stream(self, seed):
        stack, h, noise, power = _instance(seed)
        joint = joint_optimize(stack, h, noise, power, FAST, np.random.default_rng(100 + seed))
        average = average_pa_scheme(stack, h, noise, power, FAST, np.random.default_rng(100 + seed))
        assert average.scheme == "average-pa"
        assert joint.sum_rate >= average.sum_rate
        assert joint.trace[0] == pytest.approx(average.sum_rate)

    def test_single_user_is_water_fill_only(self):
        # K = M = 1: water-filling puts the whole budget on the one stream
        stack, h, noise, power = _instance(8, layers=1, atoms=4, users=1)
        joint = joint_optimize(stack, h, noise, power, FAST, np.random.default_rng(8))
        average = average_pa_scheme(stack, h, noise, power, FAST, np.random.default_rng(8))
        np.testing.assert_array_equal(joint.allocation.p, [power])
        assert joint.sum_rate >= average.sum_rate
        assert joint.trace[0] == pytest.approx(average.sum_rate)

    @pytest.mark.parametrize("seed", range(10))
    def test_later_rounds_use_water_filled_powers(self, seed):
        stack, h, noise, power = _instance(200 + seed, users=3, atoms=9)
        joint = joint_optimize(stack, h, noise, power, FAST, np.random.default_rng(seed))
        if len(joint.trace) > 1 and joint.trace[-1] > joint.trace[0]:
            # the winning round ran WBF under a water-filled allocation
            assert not np.allclose(joint.allocation.p, power / 3)
        assert joint.allocation.p.sum() == pytest.approx(power, rel=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_kkt_at_final_phases(self, seed):
        stack, h, noise, power = _instance(300 + seed)
        joint = joint_optimize(stack, h, noise, power, FAST, np.random.default_rng(seed))
        b = effective_matrix(h, sim_response(stack, joint.phases))
        allocation, _, converged = waterfill_fixed_point(b, noise, power)
        assert converged
        assert abs(allocation.p.sum() - power) <= 1e-9 * power
        gains, interference = stream_interference(b, allocation.p)
        floors = (noise + interference) / gains
        active = allocation.p > 0
        level = allocation.p[active] + floors[active]
        np.testing.assert_allclose(level, level.mean(), atol=1e-5 * power)
        assert np.all(floors[~active] >= level.mean() - 1e-5 * power)

    def test_average_pa_keeps_uniform_power(self):
        stack, h, noise, power = _instance(7)
        report = average_pa_scheme(stack, h, noise, power, FAST, np.random.default_rng(7))
        np.testing.assert_allclose(report.allocation.p, power / 2)


class TestCodebook:
    """Random codebook selection."""

    def test_winner_is_argmax_of_replay(self):
        stack, h, noise, power = _instance(10, layers=1)
        candidates = generate_codebook(np.random.default_rng(1), 200, 1, 4)
        report = codebook_scheme(stack, h, noise, power, candidates=candidates)
        uniform = PowerAllocation.uniform(2, power)
        replay = batch_sum_rate(np.matmul(h, batch_response(stack, candidates)), uniform.p, noise)
        assert report.details["winner"] == int(np.argmax(replay))
        assert report.details["codebook_size"] == 200
        assert report.sum_rate >= replay.max() - 1e-12
        np.testing.assert_allclose(report.phases.theta, candidates[int(np.argmax(replay))])

    def test_chunking_does_not_change_winner(self, monkeypatch):
        stack, h, noise, power = _instance(11, layers=1)
        candidates = generate_codebook(np.random.default_rng(2), 50, 1, 4)
        whole = codebook_scheme(stack, h, noise, power, candidates=candidates)
        monkeypatch.setattr("src.beamforming.schemes.CodebookConfig.CHUNK", 7)
        chunked = codebook_scheme(stack, h, noise, power, candidates=candidates)
        assert whole.details["winner"] == chunked.details["winner"]
        assert whole.sum_rate == chunked.sum_rate

    def test_default_size(self):
        stack, h, noise, power = _instance(12, layers=2)
        report = codebook_scheme(stack, h, noise, power, rng=np.random.default_rng(0))
        assert report.details["codebook_size"] == 10 * 2 * 4

    def test_needs_rng_or_candidates(self):
        stack, h, noise, power = _instance(13)
        with pytest.raises(ValueError, match="rng"):
            codebook_scheme(stack, h, noise, power)


class TestZeroForcing:
    """Digital ZF without SIM."""

    @pytest.mark.parametrize("antennas", [4, 8])
    def test_nulls_interference(self, antennas):
        rng = np.random.default_rng(antennas)
        for _ in range(1000):
            h = random_channel(rng, 4, antennas)
            report = zf_baseline(h, 1e-2, 1.0)
            effective = h @ report.details["precoder"]
            off_diagonal = effective - np.diag(np.diag(effective))
            assert np.max(np.abs(off_diagonal)) <= 1e-10 * np.max(np.abs(effective))

    def test_identity_channel(self):
        report = zf_baseline(np.eye(2), 1.0, 2.0)
        assert report.scheme == "zf-2ta"
        np.testing.assert_allclose(report.allocation.p, [1.0, 1.0])
        assert report.sum_rate == pytest.approx(2.0)

    def test_fewer_antennas_than_users(self):
        with pytest.raises(ChannelError, match="M >= K"):
            zf_baseline(np.ones((4, 2)), 1.0, 1.0)

    def test_rank_deficient(self):
        h = np.ones((2, 2), dtype=complex)
        with pytest.raises(RankDeficientChannelError):
            zf_baseline(h, 1.0, 1.0)


class TestQuantizedReport:
    """Discrete-phase re-evaluation."""

    def test_tag_and_reference(self):
        stack, h, noise, power = _instance(20)
        report = average_pa_scheme(stack, h, noise, power, FAST, np.random.default_rng(0))
        quantized = quantized_report(stack, h, report, noise, 4)
        assert quantized.scheme == "average-pa-q4"
        assert quantized.details["continuous_sum_rate"] == report.sum_rate
        steps = quantized.phases.theta / (np.pi / 2)
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)


class TestSchemeObjects:
    """Registry and per-trial scheme objects."""

    def test_registry_builds_every_default(self):
        for name in DEFAULT_SCHEMES:
            scheme = build_scheme(name)
            assert scheme.scheme_name == name
        assert isinstance(build_scheme("joint"), JointScheme)
        assert isinstance(build_scheme("codebook"), CodebookScheme)
        assert build_scheme("zf-8ta").num_antennas == 8
        assert build_scheme("zf-4ta").layer_independent

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="Unknown scheme"):
            build_scheme("mmse")

    def test_run_appends_quantized_report(self):
        context = _context(phase_levels=4)
        scheme = AveragePaScheme("average-pa", SchemeSettings(wbf=FAST))
        reports = scheme.run(context)
        assert [r.scheme for r in reports] == ["average-pa", "average-pa-q4"]

    def test_zf_scheme_is_layer_independent(self):
        first = ZfScheme("zf-4ta", 4).run(_context(layers=1))
        second = ZfScheme("zf-4ta", 4).run(_context(layers=2))
        assert len(first) == 1
        assert first[0].sum_rate == second[0].sum_rate

    def test_schemes_are_deterministic(self):
        settings = SchemeSettings(wbf=FAST, codebook_size=20)
        for name in ("joint", "codebook"):
            first = build_scheme(name, settings).run(_context(trial=3))[0]
            second = build_scheme(name, settings).run(_context(trial=3))[0]
            assert first.sum_rate == second.sum_rate
