import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from execgate.camera import Intrinsics, TargetModel, add_pixel_noise, project
from execgate.errors import BehindCameraError, DegenerateConfigurationError, InsufficientPointsError, InsufficientTraceError
from execgate.pnp import (
    Correspondences,
    EPnPEstimator,
    GaussNewtonEstimator,
    PnPEstimate,
    ResidualTrace,
    estimate,
    estimator_by_name,
    refine_gauss_newton,
    residual_decrease,
    residual_jacobian,
    residual_vector,
    solve_epnp,
)
from execgate.se3 import Pose, PoseDelta, apply_delta, exp_rotation, pose_distance, rot_x, rot_y, rot_z

K = Intrinsics()
BOX = TargetModel.box()


def scene(rng, depth=None, bound_deg=20.0, sigma=0.0, target=BOX):
    depth = rng.uniform(200, 1000) if depth is None else depth
    a, b, c = np.radians(rng.uniform(-bound_deg, bound_deg, 3))
    lateral = rng.uniform(-100, 100, 2)
    truth = Pose(rot_x(a) @ rot_y(b) @ rot_z(c), [lateral[0], lateral[1], depth])
    px = add_pixel_noise(project(K, truth, target), sigma, rng)
    return truth, Correspondences(target, px, K)


class TestTrace:
    def test_decrease_half(self):
        assert residual_decrease(ResidualTrace((10.0, 5.0))) == 0.5

    def test_decrease_flat(self):
        assert residual_decrease(ResidualTrace((0.7, 0.7))) == 0.0

    def test_decrease_from_zero(self):
        assert residual_decrease(ResidualTrace((0.0, 0.0))) == 0.0

    def test_decrease_needs_two(self):
        with pytest.raises(InsufficientTraceError):
            residual_decrease(ResidualTrace((3.0,)))

    def test_trace_invariants(self):
        with pytest.raises(InsufficientTraceError):
            ResidualTrace(())
        with pytest.raises(ValueError):
            ResidualTrace((1.0, -1.0))

    @given(st.lists(st.floats(1e-6, 1e3), min_size=2, max_size=10))
    def test_decrease_formula(self, r):
        r = sorted(r, reverse=True)
        assert residual_decrease(ResidualTrace(tuple(r))) == pytest.approx((r[-2] - r[-1]) / r[-2])


class TestEPnP:
    def test_three_points(self):
        with pytest.raises(InsufficientPointsError):
            TargetModel(BOX.points[:3])

    def test_pure_z_offset(self):
        c = Correspondences(BOX, project(K, Pose(np.eye(3), [0, 0, 400]), BOX), K)
        p = solve_epnp(c)
        np.testing.assert_allclose(p.translation, [0, 0, 400], atol=1e-6)
        np.testing.assert_allclose(p.rotation, np.eye(3), atol=1e-9)

    def test_depth_500_random_orientation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            truth, c = scene(rng, depth=500.0, bound_deg=45.0)
            dr, dt = pose_distance(solve_epnp(c), truth)
            assert dr < 1e-6 and dt < 1e-3

    def test_noiseless_200(self):
        rng = np.random.default_rng(6)
        worst = (0.0, 0.0)
        for _ in range(200):
            truth, c = scene(rng)
            dr, dt = pose_distance(solve_epnp(c), truth)
            worst = (max(worst[0], dr), max(worst[1], dt))
        assert worst[0] < 1e-6 and worst[1] < 1e-3

    def test_planar_target(self):
        # all four control points cannot span a planar cloud
        plane = TargetModel([[0, 0, 0], [100, 0, 0], [0, 100, 0], [100, 100, 0], [50, 20, 0]])
        c = Correspondences(plane, project(K, Pose(np.eye(3), [0, 0, 500]), plane), K)
        with pytest.raises(DegenerateConfigurationError):
            solve_epnp(c)

    @pytest.mark.parametrize("n", [5, 6, 12])
    def test_random_point_clouds(self, n):
        rng = np.random.default_rng(n)
        for _ in range(30):
            cloud = TargetModel(rng.uniform(-60, 60, (n, 3)))
            truth, c = scene(rng, target=cloud)
            dr, dt = pose_distance(solve_epnp(c), truth)
            assert dr < 1e-6 and dt < 1e-3


class TestJacobian:
    def test_central_differences_100(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            truth, c = scene(rng, sigma=1.0)
            J = residual_jacobian(truth, c)
            num = np.empty_like(J)
            for k in range(6):
                dp = np.zeros(6)
                dp[k] = h
                plus = residual_vector(apply_delta(truth, PoseDelta(dp[:3], dp[3:])), c)
                minus = residual_vector(apply_delta(truth, PoseDelta(-dp[:3], -dp[3:])), c)
                num[:, k] = (plus - minus) / (2 * h)
            worst = max(worst, np.linalg.norm(J - num) / np.linalg.norm(num))
        assert worst < 1e-4


class TestGaussNewton:
    def test_truth_is_fixed_point(self):
        rng = np.random.default_rng(1)
        truth, c = scene(rng)
        est = refine_gauss_newton(truth, c)
        assert est.trace.residuals[0] < 1e-9
        dr, dt = pose_distance(est.cam_from_target, truth)
        assert dr < 1e-9 and dt < 1e-9

    def test_converges_from_perturbation(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            truth, c = scene(rng)
            axis = rng.normal(size=3)
            shift = rng.normal(size=3)
            init = apply_delta(
                truth, PoseDelta(axis / np.linalg.norm(axis) * math.radians(5), shift / np.linalg.norm(shift) * 20)
            )
            est = refine_gauss_newton(init, c)
            dr, dt = pose_distance(est.cam_from_target, truth)
            assert dr < 1e-6 and dt < 1e-3
            first_hit = next(i for i, r in enumerate(est.trace.residuals) if r < 1e-6)
            assert first_hit <= 20

    def test_monotone_on_noisy_100(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            _, c = scene(rng, sigma=1.0)
            r = GaussNewtonEstimator()(c).trace.residuals
            assert all(b <= a for a, b in zip(r, r[1:]))
            assert r[-1] <= r[0]

    def test_behind_camera_init(self):
        rng = np.random.default_rng(4)
        _, c = scene(rng)
        with pytest.raises(BehindCameraError):
            refine_gauss_newton(Pose(np.eye(3), [0, 0, -100]), c)

    def test_singular_normal_matrix_stagnates(self):
        # every observation at the principal point and a target collapsed onto the
        # optical axis leaves rotation about z unobservable
        rng = np.random.default_rng(4)
        _, c = scene(rng)
        est = refine_gauss_newton(Pose(np.eye(3), [0, 0, 1e9]), c)
        r = est.trace.residuals
        assert len(r) >= 2 and residual_decrease(est.trace) == 0.0

    def test_noise_scaling(self):
        rng = np.random.default_rng(21)
        med = {}
        for sigma in (0.5, 1.0):
            finals = []
            for _ in range(500):
                _, c = scene(rng, sigma=sigma)
                finals.append(GaussNewtonEstimator()(c).trace.final)
            med[sigma] = np.median(finals)
        assert med[1.0] / med[0.5] == pytest.approx(2.0, rel=0.25)


class TestEstimatorInterface:
    def test_default_noiseless(self):
        rng = np.random.default_rng(30)
        truth, c = scene(rng)
        dr, dt = pose_distance(estimate(c).cam_from_target, truth)
        assert dr < 1e-6 and dt < 1e-3

    def test_epnp_only_single_entry(self):
        rng = np.random.default_rng(31)
        _, c = scene(rng, sigma=1.0)
        assert len(EPnPEstimator()(c).trace) == 1

    def test_scripted_fake(self):
        fixed = Pose(exp_rotation([0.1, 0, 0]), [1, 2, 300])

        def fake(c):
            return PnPEstimate(fixed, ResidualTrace((0.3,)))

        rng = np.random.default_rng(32)
        _, c = scene(rng)
        assert estimate(c, fake).cam_from_target is fixed

    def test_by_name(self):
        assert isinstance(estimator_by_name("epnp+gn"), GaussNewtonEstimator)
        assert isinstance(estimator_by_name("epnp"), EPnPEstimator)
        with pytest.raises(ValueError):
            estimator_by_name("dlt")

    def test_correspondence_shape(self):
        with pytest.raises(ValueError):
            Correspondences(BOX, np.zeros((7, 2)), K)
