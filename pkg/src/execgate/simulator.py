"""Monte-Carlo single-step visual alignment with an eye-in-hand camera.

Frames: base ``B``, end effector ``E``, camera ``C`` and target ``T``. A
trial places the target in front of the camera, observes it with pixel
noise, estimates ``C_T_T``, computes the end-effector target that brings the
camera to the goal configuration, optionally gates it, executes it exactly
and scores it against the end-effector target computed from the true pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .camera import MIN_DEPTH_MM, Intrinsics, TargetModel, add_pixel_noise, default_target, project, reprojection_error
from .errors import ExecGateError, InvalidParameterError, ScenarioInfeasibleError
from .gating import GatingDecision, GatingThresholds, ReliabilityReport, effective_scale, evaluate, gate, proximity_risk
from .pnp import Correspondences, GaussNewtonEstimator, PnPEstimate
from .se3 import Pose, compose, exp_rotation, inverse, pose_diff, rot_x, rot_y, rot_z, rotation_angle_deg

INITIAL_BASE_FROM_EE = Pose(np.eye(3), [0.0, 0.0, 500.0])
EE_FROM_CAM = Pose(rot_z(math.pi / 2), [50.0, 0.0, 0.0])
GOAL_CAM_FROM_TARGET = Pose(np.eye(3), [0.0, 0.0, 150.0])

MODES = ("off", "on")

Estimator = Callable[[Correspondences], PnPEstimate]


@dataclass(frozen=True)
class Scenario:
    """One grid cell. Angles in degrees, lengths in mm, noise in px.

    ``handeye_perturb`` and ``actuation_noise`` are (deg, mm) magnitudes of a
    random rigid error applied to the hand-eye transform used for planning
    and to the executed motion respectively; both default to off.
    """

    depth: float
    off_axis: float = 0.0
    orientation_bound: float = 20.0
    pixel_sigma: float = 1.0
    handeye_perturb: tuple[float, float] = (0.0, 0.0)
    success_pos_threshold: float = 5.0
    success_ori_threshold: float = 5.0
    actuation_noise: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.depth > 0:
            raise InvalidParameterError(f"depth must be positive, got {self.depth!r}")
        if self.off_axis < 0:
            raise InvalidParameterError(f"off_axis must be non-negative, got {self.off_axis!r}")
        if self.orientation_bound < 0 or self.pixel_sigma < 0:
            raise InvalidParameterError("orientation_bound and pixel_sigma must be non-negative")
        if not (self.success_pos_threshold > 0 and self.success_ori_threshold > 0):
            raise InvalidParameterError("success thresholds must be positive")
        object.__setattr__(self, "handeye_perturb", tuple(float(x) for x in self.handeye_perturb))
        object.__setattr__(self, "actuation_noise", tuple(float(x) for x in self.actuation_noise))


def standard_grid(
    depths: Sequence[float] = (200.0, 400.0, 600.0, 800.0, 1000.0),
    off_axes: Sequence[float] = (0.0, 50.0, 100.0),
    **scenario_kwargs,
) -> list[Scenario]:
    """Depth-major grid of scenarios (depth outer, off-axis inner)."""
    return [Scenario(depth=float(d), off_axis=float(o), **scenario_kwargs) for d in depths for o in off_axes]


@dataclass(frozen=True)
class FrameChain:
    base_from_ee: Pose
    ee_from_cam: Pose
    base_from_target: Pose
    goal: Pose
    target_euler_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def cam_from_target(self) -> Pose:
        return compose(inverse(compose(self.base_from_ee, self.ee_from_cam)), self.base_from_target)


def build_chain(s: Scenario, rng: np.random.Generator, target: TargetModel | None = None) -> FrameChain:
    """Place the target at ``s.depth`` along the optical axis, offset laterally by ``s.off_axis``.

    Target orientation is ``Rx(a) Ry(b) Rz(c)`` with each angle uniform in
    ``[-bound, bound]``.

    Raises:
        ScenarioInfeasibleError: if a target point ends up behind the camera.
    """
    target = target or default_target()
    phi = rng.uniform(0.0, 2.0 * math.pi)
    a, b, c = rng.uniform(-s.orientation_bound, s.orientation_bound, size=3)
    R = rot_x(math.radians(a)) @ rot_y(math.radians(b)) @ rot_z(math.radians(c))
    centroid_cam = np.array([s.off_axis * math.cos(phi), s.off_axis * math.sin(phi), s.depth])
    cam_from_target = Pose(R, centroid_cam - R @ target.centroid)
    z = cam_from_target.transform(target.points)[:, 2]
    if not (z > MIN_DEPTH_MM).all():
        raise ScenarioInfeasibleError(f"scenario {s} puts target point {int(np.argmin(z))} behind the camera")
    base_from_cam = compose(INITIAL_BASE_FROM_EE, EE_FROM_CAM)
    return FrameChain(
        base_from_ee=INITIAL_BASE_FROM_EE,
        ee_from_cam=EE_FROM_CAM,
        base_from_target=compose(base_from_cam, cam_from_target),
        goal=GOAL_CAM_FROM_TARGET,
        target_euler_deg=(float(a), float(b), float(c)),
    )


def observe(
    chain: FrameChain, target: TargetModel, k: Intrinsics, sigma: float, rng: np.random.Generator
) -> Correspondences:
    pixels = add_pixel_noise(project(k, chain.cam_from_target, target), sigma, rng)
    return Correspondences(target, pixels, k)


def random_rigid_error(magnitude: tuple[float, float], rng: np.random.Generator) -> Pose:
    """Rigid transform with rotation ``magnitude[0]`` deg and translation ``magnitude[1]`` mm about/along random directions."""
    axes = rng.normal(size=(2, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return Pose(exp_rotation(axes[0] * math.radians(magnitude[0])), axes[1] * magnitude[1])


def desired_ee_pose(base_from_ee: Pose, ee_from_cam: Pose, est_cam_from_target: Pose, goal: Pose) -> Pose:
    """End-effector pose that puts the camera at ``goal`` relative to the estimated target."""
    base_from_cam = compose(base_from_ee, ee_from_cam)
    base_from_target = compose(base_from_cam, est_cam_from_target)
    return compose(compose(base_from_target, inverse(goal)), inverse(ee_from_cam))


def mix_seed(base_seed: int, scenario_index: int, repeat_index: int) -> int:
    """64-bit trial seed: ``h = sm(base); h = sm(h ^ scenario); h = sm(h ^ repeat)`` with ``sm`` = splitmix64."""
    h = _splitmix64(base_seed)
    h = _splitmix64(h ^ (scenario_index & _MASK))
    return _splitmix64(h ^ (repeat_index & _MASK))


_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    scenario_id: int
    repeat_id: int
    seed: int
    mode: str
    depth: float
    off_axis: float
    pos_err: float
    ori_err: float
    success: bool
    decision: GatingDecision | None
    report: ReliabilityReport | None
    est_cam_from_target: Pose | None = None
    executed_ee: Pose | None = None
    step_mm: float = math.nan
    error: str | None = None

    @property
    def gated(self) -> bool:
        return self.decision is not None and self.decision.gated


@dataclass(frozen=True, eq=False)
class Perception:
    """Everything computed before the gating decision; shared by paired modes."""

    chain: FrameChain
    correspondences: Correspondences
    planning_ee_from_cam: Pose
    estimate: PnPEstimate | None = None
    e_rep: float = math.nan
    gamma: float = math.nan
    new_target: Pose | None = None
    oracle_target: Pose | None = None
    error: str | None = None


def perceive(
    s: Scenario,
    estimator: Estimator,
    target: TargetModel,
    k: Intrinsics,
    rng: np.random.Generator,
    distance_source: str = "true",
) -> Perception:
    """Build the scene, observe, estimate and compute the reliability inputs."""
    chain = build_chain(s, rng, target)
    corr = observe(chain, target, k, s.pixel_sigma, rng)
    planning_ee_from_cam = compose(chain.ee_from_cam, random_rigid_error(s.handeye_perturb, rng))
    oracle = desired_ee_pose(chain.base_from_ee, chain.ee_from_cam, chain.cam_from_target, chain.goal)
    try:
        est = estimator(corr)
        e_rep = reprojection_error(corr.pixels, project(k, est.cam_from_target, target))
    except (ExecGateError, np.linalg.LinAlgError) as exc:
        return Perception(chain, corr, planning_ee_from_cam, oracle_target=oracle, error=f"{type(exc).__name__}: {exc}")
    if distance_source == "true":
        d = float(np.linalg.norm(chain.cam_from_target.transform(target.centroid[None, :])[0]))
    elif distance_source == "estimated":
        d = float(np.linalg.norm(est.cam_from_target.transform(target.centroid[None, :])[0]))
    else:
        raise InvalidParameterError(f"distance_source must be 'true' or 'estimated', got {distance_source!r}")
    new_target = desired_ee_pose(chain.base_from_ee, planning_ee_from_cam, est.cam_from_target, chain.goal)
    return Perception(
        chain=chain,
        correspondences=corr,
        planning_ee_from_cam=planning_ee_from_cam,
        estimate=est,
        e_rep=e_rep,
        gamma=proximity_risk(d, effective_scale(target)),
        new_target=new_target,
        oracle_target=oracle,
    )


def execute(
    p: Perception,
    s: Scenario,
    th: GatingThresholds | None,
    *,
    report_thresholds: GatingThresholds | None = None,
    actuation_rng: np.random.Generator | None = None,
    scenario_id: int = 0,
    repeat_id: int = 0,
    seed: int = 0,
) -> TrialOutcome:
    """Gate (when ``th`` is given), move exactly, and score a perceived trial."""
    mode = "off" if th is None else "on"
    common = dict(scenario_id=scenario_id, repeat_id=repeat_id, seed=seed, mode=mode, depth=s.depth, off_axis=s.off_axis)
    if p.error is not None:
        return TrialOutcome(**common, pos_err=math.inf, ori_err=math.inf, success=False, decision=None, report=None, error=p.error)

    report = evaluate(p.e_rep, p.estimate.trace, p.gamma, th or report_thresholds or GatingThresholds())
    start = p.chain.base_from_ee
    if th is None:
        commanded, decision = p.new_target, GatingDecision.execute_full()
    else:
        # single-step task: previous executed pose and previous target are both the start pose
        commanded, decision = gate(report, start, start, p.new_target, th)
    executed = commanded
    if any(s.actuation_noise):
        executed = compose(commanded, random_rigid_error(s.actuation_noise, actuation_rng or np.random.default_rng(seed)))

    pos_err = float(np.linalg.norm(executed.translation - p.oracle_target.translation))
    ori_err = rotation_angle_deg(executed.rotation, p.oracle_target.rotation)
    return TrialOutcome(
        **common,
        pos_err=pos_err,
        ori_err=ori_err,
        success=pos_err <= s.success_pos_threshold and ori_err <= s.success_ori_threshold,
        decision=decision,
        report=report,
        est_cam_from_target=p.estimate.cam_from_target,
        executed_ee=executed,
        step_mm=float(np.linalg.norm(pose_diff(commanded, start).translation)),
    )


def run_trial(
    s: Scenario,
    estimator: Estimator | None = None,
    th: GatingThresholds | None = None,
    target: TargetModel | None = None,
    k: Intrinsics | None = None,
    rng: np.random.Generator | None = None,
    *,
    report_thresholds: GatingThresholds | None = None,
    distance_source: str = "true",
    scenario_id: int = 0,
    repeat_id: int = 0,
    seed: int = 0,
) -> TrialOutcome:
    """One observe-estimate-gate-move cycle. ``th=None`` disables gating."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    p = perceive(s, estimator or GaussNewtonEstimator(), target or default_target(), k or Intrinsics(), rng, distance_source)
    return execute(
        p, s, th, report_thresholds=report_thresholds, actuation_rng=rng, scenario_id=scenario_id, repeat_id=repeat_id, seed=seed
    )


def run_sweep(
    grid: Sequence[Scenario],
    repeats: int,
    base_seed: int,
    gating_modes: Iterable[str] = MODES,
    *,
    estimator: Estimator | None = None,
    thresholds: GatingThresholds | None = None,
    target: TargetModel | None = None,
    k: Intrinsics | None = None,
    distance_source: str = "true",
    progress: Callable[[int, int], None] | None = None,
) -> list[TrialOutcome]:
    """Run every (scenario, repeat, mode) with paired seeds.

    Both modes of a (scenario, repeat) pair share one perception pass, so
    they see identical scenes, noise and estimates. Output is ordered by
    scenario index, repeat index, then mode (``off`` before ``on``).
    """
    if repeats < 1:
        raise InvalidParameterError(f"repeats must be >= 1, got {repeats!r}")
    modes = [m for m in MODES if m in set(gating_modes)]
    unknown = set(gating_modes) - set(MODES)
    if unknown or not modes:
        raise InvalidParameterError(f"gating modes must be a non-empty subset of {MODES}, got {sorted(gating_modes)}")
    estimator = estimator or GaussNewtonEstimator()
    th = thresholds or GatingThresholds()
    target = target or default_target()
    k = k or Intrinsics()

    out: list[TrialOutcome] = []
    total = len(grid) * repeats
    for i, s in enumerate(grid):
        for j in range(repeats):
            seed = mix_seed(base_seed, i, j)
            p = perceive(s, estimator, target, k, np.random.default_rng(seed), distance_source)
            for mode in modes:
                out.append(
                    execute(
                        p,
                        s,
                        th if mode == "on" else None,
                        report_thresholds=th,
                        actuation_rng=np.random.default_rng([seed, 1]),
                        scenario_id=i,
                        repeat_id=j,
                        seed=seed,
                    )
                )
            if progress is not None:
                progress(i * repeats + j + 1, total)
    return out
