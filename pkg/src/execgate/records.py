"""Newline-delimited JSON trial records: one header object, then one object per trial.

Non-finite floats are written as ``null``; error fields read back as
``inf``, ``step_mm`` as ``nan``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .errors import ExecGateError
from .gating import GatingDecision, ReliabilityReport
from .se3 import Pose
from .simulator import EE_FROM_CAM, GOAL_CAM_FROM_TARGET, INITIAL_BASE_FROM_EE, TrialOutcome

RECORD_FORMAT = "execgate-trials/1"


class RecordError(ExecGateError, ValueError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _num(x: float | None):
    return x if x is not None and math.isfinite(x) else None


def make_header(config: dict, base_seed: int, modes: Sequence[str], target_points) -> dict:
    return {
        "record": "header",
        "format": RECORD_FORMAT,
        "version": __version__,
        "base_seed": base_seed,
        "modes": list(modes),
        "config": config,
        "frames": {
            "initial_base_from_ee": INITIAL_BASE_FROM_EE.to_dict(),
            "ee_from_cam": EE_FROM_CAM.to_dict(),
            "goal_cam_from_target": GOAL_CAM_FROM_TARGET.to_dict(),
        },
        "target_points_mm": [[float(v) for v in p] for p in target_points],
    }


def outcome_to_dict(o: TrialOutcome) -> dict:
    return {
        "record": "trial",
        "scenario_id": o.scenario_id,
        "repeat_id": o.repeat_id,
        "seed": o.seed,
        "mode": o.mode,
        "depth_mm": o.depth,
        "off_axis_mm": o.off_axis,
        "pos_err_mm": _num(o.pos_err),
        "ori_err_deg": _num(o.ori_err),
        "success": o.success,
        "decision": None if o.decision is None else {"kind": o.decision.kind.value, "alpha": o.decision.alpha},
        "report": None if o.report is None else o.report.to_dict(),
        "est_cam_from_target": None if o.est_cam_from_target is None else o.est_cam_from_target.to_dict(),
        "executed_ee": None if o.executed_ee is None else o.executed_ee.to_dict(),
        "step_mm": _num(o.step_mm),
        "error": o.error,
    }


def outcome_from_dict(d: dict) -> TrialOutcome:
    def err(v):
        return math.inf if v is None else float(v)

    return TrialOutcome(
        scenario_id=int(d["scenario_id"]),
        repeat_id=int(d["repeat_id"]),
        seed=int(d["seed"]),
        mode=str(d["mode"]),
        depth=float(d["depth_mm"]),
        off_axis=float(d["off_axis_mm"]),
        pos_err=err(d["pos_err_mm"]),
        ori_err=err(d["ori_err_deg"]),
        success=bool(d["success"]),
        decision=None if d["decision"] is None else GatingDecision(d["decision"]["kind"], d["decision"]["alpha"]),
        report=None if d["report"] is None else ReliabilityReport.from_dict(d["report"]),
        est_cam_from_target=None if d["est_cam_from_target"] is None else Pose.from_dict(d["est_cam_from_target"]),
        executed_ee=None if d["executed_ee"] is None else Pose.from_dict(d["executed_ee"]),
        step_mm=math.nan if d["step_mm"] is None else float(d["step_mm"]),
        error=d["error"],
    )


def dumps(header: dict, outcomes: Iterable[TrialOutcome]) -> str:
    lines = [json.dumps(header, allow_nan=False)]
    lines += [json.dumps(outcome_to_dict(o), allow_nan=False) for o in outcomes]
    return "\n".join(lines) + "\n"


def write_records(path: str | Path, header: dict, outcomes: Iterable[TrialOutcome]) -> None:
    Path(path).write_text(dumps(header, outcomes))


def read_records(path: str | Path) -> tuple[dict, list[TrialOutcome]]:
    """Parse a record file.

    Raises:
        RecordError: with the offending line number.
        OSError: if the file cannot be read.
    """
    text = Path(path).read_text()
    header = None
    outcomes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(str(path), lineno, f"invalid JSON: {exc.msg}") from None
        kind = obj.get("record") if isinstance(obj, dict) else None
        if header is None:
            if kind != "header" or obj.get("format") != RECORD_FORMAT:
                raise RecordError(str(path), lineno, f"expected a {RECORD_FORMAT} header line")
            header = obj
            continue
        if kind != "trial":
            raise RecordError(str(path), lineno, f"expected a trial record, got {kind!r}")
        try:
            outcomes.append(outcome_from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(str(path), lineno, f"malformed trial record: {exc!r}") from None
    if header is None:
        raise RecordError(str(path), 1, "empty record file")
    return header, outcomes
