import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from execgate.camera import Intrinsics, TargetModel, project
from execgate.errors import InvalidParameterError, ScenarioInfeasibleError
from execgate.gating import GatingThresholds, Strategy
from execgate.pnp import GaussNewtonEstimator
from execgate.se3 import Pose, compose, inverse, pose_distance, rot_x
from execgate.simulator import (
    GOAL_CAM_FROM_TARGET,
    INITIAL_BASE_FROM_EE,
    Scenario,
    _splitmix64,
    build_chain,
    desired_ee_pose,
    execute,
    mix_seed,
    observe,
    standard_grid,
    perceive,
    run_sweep,
    run_trial,
)

BOX = TargetModel.box()
K = Intrinsics()


class TestScenario:
    @pytest.mark.parametrize(
        "bad", [dict(depth=0), dict(depth=100, off_axis=-1), dict(depth=100, success_pos_threshold=0), dict(depth=100, pixel_sigma=-1)]
    )
    def test_invalid(self, bad):
        with pytest.raises(InvalidParameterError):
            Scenario(**bad)

    def test_standard_grid_order(self):
        g = standard_grid()
        assert len(g) == 15
        assert [(s.depth, s.off_axis) for s in g[:4]] == [(200, 0), (200, 50), (200, 100), (400, 0)]


class TestChain:
    def test_on_axis_no_rotation(self):
        ch = build_chain(Scenario(200, 0, orientation_bound=0), np.random.default_rng(0))
        np.testing.assert_allclose(ch.cam_from_target.translation, [0, 0, 200], atol=1e-12)
        np.testing.assert_allclose(ch.cam_from_target.rotation, np.eye(3), atol=1e-15)

    @given(st.integers(0, 2**32 - 1))
    def test_lateral_offset_norm(self, seed):
        ch = build_chain(Scenario(600, 100), np.random.default_rng(seed))
        centroid = ch.cam_from_target.transform(BOX.centroid[None])[0]
        assert math.hypot(centroid[0], centroid[1]) == pytest.approx(100, abs=1e-9)
        assert centroid[2] == pytest.approx(600, abs=1e-9)

    def test_orientation_bounds_10k(self):
        rng = np.random.default_rng(1)
        s = Scenario(500, 0, orientation_bound=20)
        eulers = np.array([build_chain(s, rng).target_euler_deg for _ in range(10_000)])
        assert np.abs(eulers).max() <= 20
        # uniform draws fill the interval
        assert np.abs(eulers).max() > 19.9 and abs(eulers.mean()) < 0.5

    def test_chain_consistency(self):
        ch = build_chain(Scenario(400, 50), np.random.default_rng(2))
        derived = compose(inverse(compose(ch.base_from_ee, ch.ee_from_cam)), ch.base_from_target)
        dr, dt = pose_distance(derived, ch.cam_from_target)
        assert dr < 1e-12 and dt < 1e-9

    def test_infeasible(self):
        with pytest.raises(ScenarioInfeasibleError):
            build_chain(Scenario(10, 0, orientation_bound=0), np.random.default_rng(0))

    def test_observe_deterministic(self):
        ch = build_chain(Scenario(400), np.random.default_rng(3))
        a = observe(ch, BOX, K, 1.0, np.random.default_rng(4))
        b = observe(ch, BOX, K, 1.0, np.random.default_rng(4))
        np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_noise_level_at_true_pose(self):
        rng = np.random.default_rng(5)
        errs = []
        for _ in range(300):
            ch = build_chain(Scenario(500), rng)
            c = observe(ch, BOX, K, 1.0, rng)
            errs.append(np.linalg.norm(c.pixels - project(K, ch.cam_from_target, BOX), axis=1).mean())
        # mean of a 2D Rayleigh(1) is sqrt(pi/2)
        assert np.mean(errs) == pytest.approx(math.sqrt(math.pi / 2), rel=0.05)


class TestDesiredPose:
    def test_contract_true_estimate(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            ch = build_chain(Scenario(rng.uniform(200, 1000), rng.uniform(0, 100)), rng)
            ee = desired_ee_pose(ch.base_from_ee, ch.ee_from_cam, ch.cam_from_target, ch.goal)
            achieved = compose(inverse(compose(ee, ch.ee_from_cam)), ch.base_from_target)
            dr, dt = pose_distance(achieved, ch.goal)
            assert dr < 1e-9 and dt < 1e-6

    def test_hand_derived_chain(self):
        # identity hand-eye, base at origin, target 400 mm ahead, goal 150 mm standoff: move 250 mm along z
        ee = desired_ee_pose(Pose.identity(), Pose.identity(), Pose(np.eye(3), [0, 0, 400]), Pose(np.eye(3), [0, 0, 150]))
        np.testing.assert_allclose(ee.translation, [0, 0, 250], atol=1e-12)
        np.testing.assert_allclose(ee.rotation, np.eye(3), atol=1e-15)

    def test_translation_error_propagates_rigidly(self):
        e = np.array([3.0, -4.0, 12.0])
        truth = Pose(rot_x(0.2), [10, 20, 600])
        wrong = Pose(truth.rotation, truth.translation + e)
        base = Pose.identity()
        hand = Pose(np.eye(3), [0, 50, 0])
        a = desired_ee_pose(base, hand, truth, GOAL_CAM_FROM_TARGET)
        b = desired_ee_pose(base, hand, wrong, GOAL_CAM_FROM_TARGET)
        assert np.linalg.norm(a.translation - b.translation) == pytest.approx(13.0, abs=1e-9)


class TestSeed:
    def test_splitmix_reference(self):
        # first outputs of the reference splitmix64 generator seeded with 0
        state = 0
        outs = []
        for _ in range(3):
            outs.append(_splitmix64(state))
            state = (state + 0x9E3779B97F4A7C15) & (2**64 - 1)
        assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_mix_distinct(self):
        seeds = {mix_seed(7, i, j) for i in range(15) for j in range(100)}
        assert len(seeds) == 1500
        assert mix_seed(7, 1, 2) != mix_seed(7, 2, 1)
        assert all(0 <= s < 2**64 for s in seeds)


class TestTrial:
    def test_zero_noise_exact(self):
        o = run_trial(Scenario(800, 100, pixel_sigma=0), seed=3)
        assert o.success and o.pos_err < 1e-3 and o.ori_err < 1e-4

    def test_reliable_gated_equals_ungated(self):
        s = Scenario(300, 0, pixel_sigma=0.2)
        off = run_trial(s, th=None, seed=11)
        on = run_trial(s, th=GatingThresholds(), seed=11)
        assert on.report.reliable
        assert on.pos_err == off.pos_err and on.ori_err == off.ori_err

    def test_forced_rejection_stays_home(self):
        s = Scenario(500, 50)
        o = run_trial(s, th=GatingThresholds(tau_rep=0.0, strategy=Strategy.REJECT), seed=5)
        assert o.report.rep_trigger and o.gated
        assert pose_distance(o.executed_ee, INITIAL_BASE_FROM_EE) == (0.0, 0.0)
        p = perceive(s, GaussNewtonEstimator(), BOX, K, np.random.default_rng(5))
        assert o.pos_err == pytest.approx(np.linalg.norm(p.oracle_target.translation - INITIAL_BASE_FROM_EE.translation))

    def test_estimator_failure_is_sentinel(self):
        def broken(c):
            raise np.linalg.LinAlgError("boom")

        o = run_trial(Scenario(400), estimator=broken, seed=1)
        assert o.pos_err == math.inf and not o.success and "boom" in o.error

    def test_scaled_step_is_shorter(self):
        rng = np.random.default_rng(9)
        th = GatingThresholds(tau_rep=0.0)
        for i in range(30):
            s = Scenario(rng.uniform(200, 1000), rng.uniform(0, 100))
            p = perceive(s, GaussNewtonEstimator(), BOX, K, np.random.default_rng(i))
            on = execute(p, s, th)
            off = execute(p, s, None)
            assert on.gated and on.step_mm < off.step_mm


class TestSweep:
    def test_pairing_and_order(self):
        out = run_sweep(standard_grid(depths=(200, 1000)), 3, 42)
        assert len(out) == 2 * 3 * 3 * 2
        keys = [(o.scenario_id, o.repeat_id, o.mode) for o in out]
        assert keys == sorted(keys, key=lambda k: (k[0], k[1], k[2] != "off"))
        for off, on in zip(out[0::2], out[1::2]):
            assert off.seed == on.seed and off.report == on.report
            assert pose_distance(off.est_cam_from_target, on.est_cam_from_target) == (0.0, 0.0)

    def test_deterministic(self):
        a = run_sweep(standard_grid(depths=(400,)), 4, 9)
        b = run_sweep(standard_grid(depths=(400,)), 4, 9)
        assert [(o.pos_err, o.ori_err, o.seed) for o in a] == [(o.pos_err, o.ori_err, o.seed) for o in b]

    def test_mode_subset(self):
        out = run_sweep(standard_grid(depths=(400,), off_axes=(0,)), 2, 0, ["on"])
        assert {o.mode for o in out} == {"on"}
        with pytest.raises(InvalidParameterError):
            run_sweep(standard_grid(), 1, 0, ["sideways"])

    def test_full_grid_counts(self):
        out = run_sweep(standard_grid(pixel_sigma=0.0), 20, 1, ["off"])
        assert len(out) == 300
        assert all(o.success for o in out)
