"""Reliability evaluation and execution gating of pose-driven motion commands.

A pose estimate is judged on three criteria: mean reprojection error,
optimizer residual stability, and the proximity ratio of camera distance to
target size. If any criterion triggers, the motion command is either
rejected (hold the previous target) or shortened by a fixed factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np
from numpy.typing import ArrayLike

from .camera import TargetModel
from .errors import InsufficientPointsError, InvalidParameterError
from .pnp import ResidualTrace, residual_decrease
from .se3 import Pose, apply_delta, pose_diff, scale_delta


class Strategy(str, enum.Enum):
    REJECT = "reject"
    SCALE_STEP = "scale"


@dataclass(frozen=True)
class GatingThresholds:
    """Trigger thresholds and the gating action.

    A criterion triggers when its value is strictly above its threshold.
    ``tau_r_floor`` keeps the stagnation test (``delta_r < tau_dr``) quiet
    when the final residual is already at the expected noise level.
    """

    tau_rep: float = 2.0
    tau_r: float = 1.5
    tau_dr: float = 0.01
    tau_gamma: float = 6.0
    alpha: float = 0.5
    strategy: Strategy = Strategy.SCALE_STEP
    tau_r_floor: float = 1.25

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        for name in ("tau_rep", "tau_r", "tau_dr", "tau_gamma", "tau_r_floor"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value >= 0 and not math.isnan(value)):
                raise InvalidParameterError(f"{name} must be a non-negative number, got {value!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha!r}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["strategy"] = self.strategy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> GatingThresholds:
        return cls(**d)

    def with_(self, **changes) -> GatingThresholds:
        return replace(self, **changes)


@dataclass(frozen=True)
class ReliabilityReport:
    e_rep: float
    r_gn: float
    delta_r: float | None
    gamma: float
    rep_trigger: bool
    gn_trigger: bool
    prox_trigger: bool
    reliable: bool

    @property
    def any_trigger(self) -> bool:
        return self.rep_trigger or self.gn_trigger or self.prox_trigger

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> ReliabilityReport:
        return cls(**{f.name: d[f.name] for f in fields(cls)})


class DecisionKind(str, enum.Enum):
    EXECUTE_FULL = "execute_full"
    REJECTED = "rejected"
    SCALED = "scaled"


@dataclass(frozen=True)
class GatingDecision:
    kind: DecisionKind
    alpha: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DecisionKind(self.kind))

    @classmethod
    def execute_full(cls) -> GatingDecision:
        return cls(DecisionKind.EXECUTE_FULL)

    @classmethod
    def rejected(cls) -> GatingDecision:
        return cls(DecisionKind.REJECTED)

    @classmethod
    def scaled(cls, alpha: float) -> GatingDecision:
        return cls(DecisionKind.SCALED, alpha)

    @property
    def gated(self) -> bool:
        return self.kind is not DecisionKind.EXECUTE_FULL

    def __str__(self) -> str:
        return f"scaled({self.alpha:g})" if self.kind is DecisionKind.SCALED else self.kind.value


@dataclass(frozen=True)
class TriggerStats:
    rep_count: int = 0
    gn_count: int = 0
    prox_count: int = 0
    gated_union_count: int = 0
    total_trials: int = 0

    def merge(self, other: TriggerStats) -> TriggerStats:
        return TriggerStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def gated_fraction(self) -> float:
        return self.gated_union_count / self.total_trials if self.total_trials else 0.0


def effective_scale(target: TargetModel | ArrayLike) -> float:
    """Diameter of the feature-point cloud (largest pairwise distance, mm)."""
    pts = np.asarray(target.points if isinstance(target, TargetModel) else target, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        raise InsufficientPointsError(f"effective scale needs at least 2 points, got {len(pts)}")
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def proximity_risk(d: float, s: float) -> float:
    """Ratio of camera-target distance to target scale."""
    if not s > 0:
        raise InvalidParameterError(f"target scale must be positive, got {s!r}")
    if d < 0:
        raise InvalidParameterError(f"distance must be non-negative, got {d!r}")
    return d / s


def evaluate(e_rep: float, trace: ResidualTrace, gamma: float, th: GatingThresholds) -> ReliabilityReport:
    """Apply the three reliability criteria.

    The residual-stability criterion fires when the final residual exceeds
    ``tau_r``, or when the last relative decrease is below ``tau_dr`` while
    the residual is still above ``tau_r_floor``. Single-entry traces
    (closed-form estimators) skip the decrease test.
    """
    if e_rep < 0 or gamma < 0:
        raise InvalidParameterError("e_rep and gamma must be non-negative")
    r_gn = trace.final
    delta_r = residual_decrease(trace) if len(trace) >= 2 else None
    rep = e_rep > th.tau_rep
    gn = r_gn > th.tau_r or (delta_r is not None and delta_r < th.tau_dr and r_gn > th.tau_r_floor)
    prox = gamma > th.tau_gamma
    return ReliabilityReport(
        e_rep=float(e_rep),
        r_gn=float(r_gn),
        delta_r=None if delta_r is None else float(delta_r),
        gamma=float(gamma),
        rep_trigger=bool(rep),
        gn_trigger=bool(gn),
        prox_trigger=bool(prox),
        reliable=not (rep or gn or prox),
    )


def gate(
    report: ReliabilityReport,
    prev_executed: Pose,
    prev_target: Pose,
    new_target: Pose,
    th: GatingThresholds,
) -> tuple[Pose, GatingDecision]:
    """Decide which end-effector target to command.

    Reliable estimates pass through unchanged. Otherwise ``REJECT`` keeps
    ``prev_target``, and ``SCALE_STEP`` moves from ``prev_executed`` by
    ``alpha`` times the body-frame delta towards ``new_target``.
    """
    if report.reliable:
        return new_target, GatingDecision.execute_full()
    if th.strategy is Strategy.REJECT:
        return prev_target, GatingDecision.rejected()
    step = scale_delta(pose_diff(new_target, prev_executed), th.alpha)
    return apply_delta(prev_executed, step), GatingDecision.scaled(th.alpha)


def accumulate(stats: TriggerStats, report: ReliabilityReport) -> TriggerStats:
    return TriggerStats(
        rep_count=stats.rep_count + report.rep_trigger,
        gn_count=stats.gn_count + report.gn_trigger,
        prox_count=stats.prox_count + report.prox_trigger,
        gated_union_count=stats.gated_union_count + report.any_trigger,
        total_trials=stats.total_trials + 1,
    )
