"""Aggregate trial outcomes into success, error, tail-risk and trigger tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyInputError, InvalidParameterError
from .gating import TriggerStats, accumulate
from .simulator import TrialOutcome

FORMATS = ("csv", "json", "md")
GROUP_KEYS = ("depth", "off_axis", "mode")

TRIAL_CSV_COLUMNS = (
    "scenario_id", "repeat_id", "mode", "depth_mm", "off_axis_mm", "pos_err_mm", "ori_err_deg", "success",
    "gated", "rep_trigger", "gn_trigger", "prox_trigger", "e_rep_px", "r_gn_px", "delta_r", "gamma", "seed",
)  # fmt: skip

# ori_p95_deg / ori_max_deg extend the position-only tail table
SUMMARY_COLUMNS = (
    "group", "n", "success_rate_pct", "failures", "pos_mean_mm", "pos_std_mm", "ori_mean_deg", "ori_std_deg",
    "pos_p95_mm", "pos_max_mm", "ori_p95_deg", "ori_max_deg", "nonfinite", "gated",
    "rep_triggers", "gn_triggers", "prox_triggers", "gated_union",
)  # fmt: skip

_DIGITS = {"success_rate_pct": 1}
_INT_COLUMNS = {"n", "failures", "nonfinite", "gated", "rep_triggers", "gn_triggers", "prox_triggers", "gated_union"}

SUMMARY_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tables"],
    "properties": {
        "tables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["title", "rows"],
                "properties": {
                    "title": {"type": "string"},
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": list(SUMMARY_COLUMNS),
                            "properties": {
                                "group": {"type": "string"},
                                **{c: {"type": "integer", "minimum": 0} for c in _INT_COLUMNS},
                                "success_rate_pct": {"type": "number", "minimum": 0, "maximum": 100},
                                **{
                                    c: {"type": ["number", "null"]}
                                    for c in SUMMARY_COLUMNS
                                    if c not in _INT_COLUMNS and c not in ("group", "success_rate_pct")
                                },
                            },
                        },
                    },
                },
            },
        }
    },
}


@dataclass(frozen=True)
class MetricsSummary:
    """Statistics over finite errors; non-finite (failed-estimate) trials count as failures."""

    total: int
    successes: int
    success_rate: float
    pos_mean: float
    pos_std: float
    ori_mean: float
    ori_std: float
    pos_p95: float
    pos_max: float
    ori_p95: float
    ori_max: float
    nonfinite: int
    gated: int
    triggers: TriggerStats = field(default_factory=TriggerStats)

    @property
    def failures(self) -> int:
        return self.total - self.successes

    def row(self, group: str) -> dict:
        """Rounded table row (rates 0.1 %, mm and deg 0.01)."""
        raw = {
            "group": group,
            "n": self.total,
            "success_rate_pct": self.success_rate,
            "failures": self.failures,
            "pos_mean_mm": self.pos_mean,
            "pos_std_mm": self.pos_std,
            "ori_mean_deg": self.ori_mean,
            "ori_std_deg": self.ori_std,
            "pos_p95_mm": self.pos_p95,
            "pos_max_mm": self.pos_max,
            "ori_p95_deg": self.ori_p95,
            "ori_max_deg": self.ori_max,
            "nonfinite": self.nonfinite,
            "gated": self.gated,
            "rep_triggers": self.triggers.rep_count,
            "gn_triggers": self.triggers.gn_count,
            "prox_triggers": self.triggers.prox_count,
            "gated_union": self.triggers.gated_union_count,
        }
        return {k: _round(k, v) for k, v in raw.items()}


def _round(column: str, v):
    if column == "group" or column in _INT_COLUMNS:
        return v
    if v is None or not math.isfinite(v):
        return None
    return round(float(v), _DIGITS.get(column, 2))


def nearest_rank(values: Sequence[float], q: float) -> float:
    """The ``ceil(q * n)``-th smallest value (1-based)."""
    if not len(values):
        raise EmptyInputError("percentile of an empty sequence")
    s = sorted(values)
    return float(s[max(1, math.ceil(q * len(s) - 1e-9)) - 1])


def _moments(x: np.ndarray) -> tuple[float, float, float, float]:
    if x.size == 0:
        return math.nan, math.nan, math.nan, math.nan
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return float(np.mean(x)), std, nearest_rank(x.tolist(), 0.95), float(np.max(x))


def summarize(outcomes: Sequence[TrialOutcome]) -> MetricsSummary:
    if not outcomes:
        raise EmptyInputError("cannot summarise an empty outcome list")
    pos = np.array([o.pos_err for o in outcomes], dtype=np.float64)
    ori = np.array([o.ori_err for o in outcomes], dtype=np.float64)
    finite = np.isfinite(pos) & np.isfinite(ori)
    pm, ps, pp, px = _moments(pos[finite])
    om, os_, op, ox = _moments(ori[finite])
    stats = TriggerStats()
    for o in outcomes:
        if o.report is not None:
            stats = accumulate(stats, o.report)
    successes = sum(bool(o.success) for o in outcomes)
    return MetricsSummary(
        total=len(outcomes),
        successes=successes,
        success_rate=100.0 * successes / len(outcomes),
        pos_mean=pm,
        pos_std=ps,
        ori_mean=om,
        ori_std=os_,
        pos_p95=pp,
        pos_max=px,
        ori_p95=op,
        ori_max=ox,
        nonfinite=int((~finite).sum()),
        gated=sum(o.gated for o in outcomes),
        triggers=stats,
    )


def _key(o: TrialOutcome, key: str):
    if key == "depth":
        return o.depth
    if key == "off_axis":
        return o.off_axis
    if key == "mode":
        return o.mode
    raise InvalidParameterError(f"group key must be one of {GROUP_KEYS}, got {key!r}")


def group_by(outcomes: Sequence[TrialOutcome], key: str) -> dict:
    """Partition by ``key`` and summarise each part; keys in sorted order."""
    if not outcomes:
        raise EmptyInputError("cannot group an empty outcome list")
    parts: dict = {}
    for o in outcomes:
        parts.setdefault(_key(o, key), []).append(o)
    return {k: summarize(parts[k]) for k in sorted(parts)}


def _label(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _rows(obj: MetricsSummary | Mapping) -> list[dict]:
    if isinstance(obj, MetricsSummary):
        return [obj.row("all")]
    return [s.row(_label(k)) for k, s in obj.items()]


def _md_table(rows: list[dict], columns: Sequence[str]) -> str:
    cells = [[_md_cell(r[c], c) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    line = lambda vals: "| " + " | ".join(v.rjust(w) for v, w in zip(vals, widths)) + " |"  # noqa: E731
    out = [line(columns), "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|"]
    out += [line(r) for r in cells]
    return "\n".join(out)


def _md_cell(v, column: str) -> str:
    if v is None:
        return "-"
    if column == "group" or column in _INT_COLUMNS:
        return str(v)
    return f"{v:.{_DIGITS.get(column, 2)}f}"


def _csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: ("" if r[c] is None else r[c]) for c in columns})
    return buf.getvalue()


def render(obj: MetricsSummary | Mapping, fmt: str, title: str = "summary") -> str:
    """Render one summary, or a ``group -> summary`` map, as csv, json or markdown."""
    return render_tables([(title, obj)], fmt)


def render_tables(tables: Sequence[tuple[str, MetricsSummary | Mapping]], fmt: str) -> str:
    if fmt not in FORMATS:
        raise InvalidParameterError(f"format must be one of {FORMATS}, got {fmt!r}")
    if fmt == "json":
        payload = {"tables": [{"title": t, "rows": _rows(obj)} for t, obj in tables]}
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        rows = []
        for t, obj in tables:
            rows += [{"table": t, **r} for r in _rows(obj)]
        cols = ("table", *SUMMARY_COLUMNS) if len(tables) > 1 else SUMMARY_COLUMNS
        return _csv(rows, cols)
    parts = []
    for t, obj in tables:
        parts.append(f"## {t}\n\n{_md_table(_rows(obj), SUMMARY_COLUMNS)}\n")
    return "\n".join(parts)


def trial_rows(outcomes: Iterable[TrialOutcome]) -> list[dict]:
    rows = []
    for o in outcomes:
        r = o.report
        rows.append({
            "scenario_id": o.scenario_id,
            "repeat_id": o.repeat_id,
            "mode": o.mode,
            "depth_mm": o.depth,
            "off_axis_mm": o.off_axis,
            "pos_err_mm": o.pos_err,
            "ori_err_deg": o.ori_err,
            "success": int(o.success),
            "gated": int(o.gated),
            "rep_trigger": None if r is None else int(r.rep_trigger),
            "gn_trigger": None if r is None else int(r.gn_trigger),
            "prox_trigger": None if r is None else int(r.prox_trigger),
            "e_rep_px": None if r is None else r.e_rep,
            "r_gn_px": None if r is None else r.r_gn,
            "delta_r": None if r is None else r.delta_r,
            "gamma": None if r is None else r.gamma,
            "seed": o.seed,
        })  # fmt: skip
    return rows


def render_trials_csv(outcomes: Iterable[TrialOutcome]) -> str:
    """Plot-ready per-trial CSV in the fixed :data:`TRIAL_CSV_COLUMNS` order."""
    return _csv(trial_rows(outcomes), TRIAL_CSV_COLUMNS)


def report_tables(outcomes: Sequence[TrialOutcome], group: str | None = None) -> list[tuple[str, Mapping]]:
    """Tables for a record set; each grouping is split by gating mode side by side."""
    if not outcomes:
        raise EmptyInputError("no trial records")
    modes = sorted({o.mode for o in outcomes})

    def by(key: str) -> dict:
        if len(modes) == 1 or key == "mode":
            return group_by(outcomes, key)
        out = {}
        for k, summary in group_by(outcomes, key).items():
            for m, s in group_by([o for o in outcomes if _key(o, key) == k], "mode").items():
                out[f"{_label(k)} / {m}"] = s
        return out

    if group is not None:
        return [(f"by {group}", by(group))]
    return [
        ("overall", group_by(outcomes, "mode")),
        ("success vs depth", by("depth")),
        ("success vs off-axis", by("off_axis")),
    ]
