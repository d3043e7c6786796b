import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batterbot import sim
from batterbot.sim import (
    SMALL_BOWL,
    STIR_MOTIONS,
    BatterTruth,
    BowlSpec,
    DepositionGrid,
    MotionKind,
    SimulationError,
    SurrogateParams,
)


def quiet(**kw):
    return SurrogateParams(**kw)


class TestTorque:
    def test_zero_at_surface(self, params):
        t = BatterTruth(1.2, 0.03)
        assert sim.torque_for_push(t, params, 0.03, noise=False) == 0.0

    def test_hand_value(self, params):
        t = BatterTruth(1.0, 0.05)
        assert sim.torque_for_push(t, params, 0.02, noise=False) == pytest.approx(1.2 * math.exp(-1.5) * 0.03, rel=1e-12)

    def test_wetter_batter_is_lighter(self, params):
        a = sim.torque_for_push(BatterTruth(1.0, 0.05), params, 0.02, noise=False)
        b = sim.torque_for_push(BatterTruth(1.5, 0.05), params, 0.02, noise=False)
        assert b == pytest.approx(0.0037941, rel=1e-4)
        assert b < a

    def test_same_seed_same_noise(self, params):
        t = BatterTruth(1.3, 0.04)
        h = sim.probe_heights()
        a = sim.run_push_sequence(t, params, h, rng_seed=11)
        b = sim.run_push_sequence(t, params, h, rng_seed=11)
        assert np.array_equal(a.torques, b.torques)

    @settings(max_examples=50, deadline=None)
    @given(r=st.floats(0.8, 1.9), lvl=st.floats(0.01, 0.06), u=st.floats(0, 500),
           d1=st.floats(0.001, 0.009))
    def test_partial_derivative_signs(self, r, lvl, u, d1):
        p = SurrogateParams()
        base = BatterTruth(r, lvl, u)
        z = lvl - d1
        t0 = sim.clean_torque(base, p, z)
        assert sim.clean_torque(base, p, z - 0.001) > t0
        assert sim.clean_torque(base.replace(ratio=r + 0.05), p, z) < t0
        assert sim.clean_torque(base.replace(stir_progress=u + 10), p, z) < t0


class TestPushSequence:
    def test_twenty_one_heights(self, params):
        curve = sim.run_push_sequence(BatterTruth(1.2, 0.03), params, sim.probe_heights())
        assert len(curve) == 21
        assert curve.heights[0] == pytest.approx(0.003)
        assert curve.heights[-1] == pytest.approx(0.063)

    def test_air_only(self, params):
        t = BatterTruth(1.2, 0.002)
        curve = sim.run_push_sequence(t, params, sim.probe_heights())
        assert np.all(np.abs(curve.torques) <= 3 * params.sigma_air + 1e-15) or \
            np.mean(np.abs(curve.torques) <= 3 * params.sigma_air) > 0.95

    def test_noise_free_points_on_line(self, params):
        lvl = 0.037
        curve = sim.run_push_sequence(BatterTruth(1.1, lvl), params, sim.probe_heights(), noise=False)
        d, t = curve.immersion(lvl)
        slope = t / d
        np.testing.assert_allclose(slope, slope[0], rtol=1e-12)

    def test_empty_heights(self, params):
        with pytest.raises(SimulationError):
            sim.run_push_sequence(BatterTruth(1.1, 0.03), params, [])

    def test_heights_must_increase(self, params):
        with pytest.raises(SimulationError):
            sim.run_push_sequence(BatterTruth(1.1, 0.03), params, [0.01, 0.005])


class TestStirring:
    def test_table_speeds(self):
        speeds = {k: m.speed for k, m in STIR_MOTIONS.items()}
        assert speeds == {MotionKind.QUICK_STIR: 15.7, MotionKind.FINE_STIR: 6.28,
                          MotionKind.EDGE_SCRAPE: 3.14, MotionKind.WHISK_SHAKE: 8.0}
        assert STIR_MOTIONS[MotionKind.WHISK_SHAKE].speed_unit == "Hz"

    def test_quick_stir_forty_seconds(self):
        t = sim.apply_stir_motion(BatterTruth(1.2, 0.03), STIR_MOTIONS[MotionKind.QUICK_STIR], 40)
        assert t.stir_progress == 40
        assert (t.ratio, t.level) == (1.2, 0.03)

    def test_zero_rate_is_identity(self):
        t = BatterTruth(1.2, 0.03, 5.0)
        still = STIR_MOTIONS[MotionKind.FINE_STIR].with_rate(0.0)
        assert sim.apply_stir_motion(t, still, 30) == t

    def test_preliminary_weighted_sum(self):
        t = sim.run_preliminary_stir(BatterTruth(1.2, 0.03))
        assert sum(s for _, s in sim.PRELIMINARY_SEQUENCE) == 90
        assert t.stir_progress == pytest.approx(22.5 * (1.0 + 0.3 + 0.5 + 0.4))

    def test_trial_torque_strictly_decreasing(self, params):
        t = sim.run_preliminary_stir(BatterTruth(1.2, 0.03))
        quick = STIR_MOTIONS[MotionKind.QUICK_STIR]
        seq = []
        for _ in range(200):
            t = sim.apply_stir_motion(t, quick, sim.TRIAL_STIR_SECONDS)
            seq.append(float(sim.clean_torque(t, params, 0.003)))
        seq = np.array(seq)
        assert np.all(np.diff(seq) < 0)
        assert seq[-1] > 0


class TestBowl:
    def test_centred_probe(self):
        assert np.allclose(sim.probe_bowl_contact(SMALL_BOWL, (0, 0), (1, 0)), (0.083, 0))

    def test_backward_probe(self):
        assert np.allclose(sim.probe_bowl_contact(SMALL_BOWL, (0.01, 0), (-1, 0)), (-0.083, 0))

    def test_four_probes_on_circle(self):
        for d in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
            p = sim.probe_bowl_contact(SMALL_BOWL, (0.01, 0.02), d)
            assert abs(np.hypot(*p) - 0.083) <= 1e-12

    def test_start_outside(self):
        with pytest.raises(SimulationError):
            sim.probe_bowl_contact(SMALL_BOWL, (0.2, 0), (1, 0))

    def test_invalid_bowl(self):
        with pytest.raises(SimulationError):
            BowlSpec(radius=-1.0)


class TestPourFlow:
    def test_upright(self, params):
        assert sim.pour_flow(0.0, BatterTruth(1.2, 0.03), params) == 0.0

    def test_threshold_closed(self, params):
        t = BatterTruth(1.2, 0.03)
        assert sim.pour_flow(sim.theta_start(0.03, params), t, params) == params.flow_rate

    def test_fuller_bowl_pours_sooner(self, params):
        assert sim.theta_start(0.04, params) < sim.theta_start(0.03, params)


class TestDeposition:
    def test_width_formula(self):
        # w = Q / (v * tau): 2e-7 m^3/s at 1 cm/s over 2 mm gives 1 cm
        p = SurrogateParams(flow_rate=2e-7, thickness0=0.002)
        assert float(sim.stroke_width_for_speed(0.01, 1.0, p)) == pytest.approx(0.01)
        assert float(sim.stroke_width_for_speed(0.02, 1.0, p)) == pytest.approx(0.005)

    def test_volume_conserved(self, params):
        g = DepositionGrid.empty(0.2, 0.2, 0.001)
        path = np.array([[0.03, 0.05], [0.15, 0.08], [0.16, 0.17]])
        out = sim.deposit_stroke(g, path, 0.03, BatterTruth(1.3, 0.03), params)
        length = np.hypot(*np.diff(path, axis=0).T).sum()
        assert out.volume == pytest.approx(params.flow_rate * length / 0.03, rel=1e-9)
        assert g.volume == 0.0

    def test_disjoint_strokes_sum(self, params):
        g = DepositionGrid.empty(0.2, 0.2, 0.001)
        t = BatterTruth(1.3, 0.03)
        a = sim.deposit_stroke(g, [[0.02, 0.05], [0.18, 0.05]], 0.04, t, params)
        b = sim.deposit_stroke(a, [[0.02, 0.15], [0.18, 0.15]], 0.04, t, params)
        assert b.volume == pytest.approx(2 * a.volume)

    def test_pool_diameter(self, params):
        t = BatterTruth(1.3, 0.03)
        V = 2e-5
        g = sim.deposit_pool(DepositionGrid.empty(0.2, 0.2, 0.0005), (0.1, 0.1), V, t, params)
        D = 2 * math.sqrt(V / (math.pi * sim.spread_thickness(1.3, params)))
        area = (g.cells > 0).sum() * 0.0005**2
        assert 2 * math.sqrt(area / math.pi) == pytest.approx(D, rel=0.01)

    def test_speed_must_be_positive(self, params):
        with pytest.raises(SimulationError):
            sim.deposit_stroke(DepositionGrid.empty(0.1, 0.1), [[0, 0], [0.05, 0]], 0.0,
                               BatterTruth(1.3, 0.03), params)


class TestSpoutFrames:
    def test_no_flow_constant(self, params):
        fr = sim.spout_mask_sequence(np.full(30, 0.1), 0.03, params)
        assert fr.flow_start is None
        assert np.all(fr.extents == fr.extents[0])

    def test_single_increasing_run(self, params):
        lvl = 0.03
        ang = sim.theta_start(lvl, params) - 0.01 + 0.0007 * np.arange(60)
        fr = sim.spout_mask_sequence(ang, lvl, params, rng_seed=4)
        inc = np.diff(fr.extents) > 0
        assert np.all(np.diff(fr.extents) >= 0)
        runs = np.sum(np.diff(np.r_[0, inc.astype(int), 0]) == 1)
        assert runs == 1
        assert np.all(np.diff(fr.extents[fr.flow_start - 1:fr.spout_end + 1]) > 0)


class TestParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(SimulationError):
            SurrogateParams(kappa=0.0)

    def test_truth_ranges(self):
        with pytest.raises(SimulationError):
            BatterTruth(2.5, 0.03)
        with pytest.raises(SimulationError):
            BatterTruth(1.2, 0.09)
