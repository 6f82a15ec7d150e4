"""Reliability-gated execution of PnP-driven robot alignment, with a Monte-Carlo simulator."""

__version__ = "0.1.0"

from .camera import Intrinsics, TargetModel, project, reprojection_error  # noqa: E402
from .gating import GatingDecision, GatingThresholds, ReliabilityReport, Strategy, TriggerStats, evaluate, gate  # noqa: E402
from .pnp import Correspondences, EPnPEstimator, GaussNewtonEstimator, PnPEstimate, ResidualTrace  # noqa: E402
from .se3 import Pose, PoseDelta, apply_delta, compose, inverse, pose_diff, scale_delta  # noqa: E402
from .simulator import Scenario, TrialOutcome, standard_grid, run_sweep, run_trial  # noqa: E402

__all__ = [
    "Correspondences",
    "EPnPEstimator",
    "GatingDecision",
    "GatingThresholds",
    "GaussNewtonEstimator",
    "Intrinsics",
    "PnPEstimate",
    "Pose",
    "PoseDelta",
    "ReliabilityReport",
    "ResidualTrace",
    "Scenario",
    "Strategy",
    "TargetModel",
    "TrialOutcome",
    "TriggerStats",
    "apply_delta",
    "compose",
    "evaluate",
    "gate",
    "inverse",
    "standard_grid",
    "pose_diff",
    "project",
    "reprojection_error",
    "run_sweep",
    "run_trial",
    "scale_delta",
]
