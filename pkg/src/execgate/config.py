"""Run configuration: a JSON document validated against :data:`CONFIG_SCHEMA`."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .camera import Intrinsics, TargetModel, load_target
from .errors import ConfigError, ExecGateError
from .gating import GatingThresholds
from .simulator import Scenario, standard_grid

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NONNEG, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "execgate run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "depths": {"type": "array", "items": _POS, "minItems": 1},
        "off_axes": {"type": "array", "items": _NONNEG, "minItems": 1},
        "orientation_bound": _NONNEG,
        "repeats": {"type": "integer", "minimum": 1},
        "pixel_sigma": _NONNEG,
        "success_pos_threshold": _POS,
        "success_ori_threshold": _POS,
        "handeye_perturb": _PAIR,
        "actuation_noise": _PAIR,
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau_rep": _NONNEG,
                "tau_r": _NONNEG,
                "tau_dr": _NONNEG,
                "tau_gamma": _NONNEG,
                "tau_r_floor": _NONNEG,
                "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "strategy": {"enum": ["reject", "scale"]},
            },
        },
        "intrinsics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"fx": _POS, "fy": _POS, "cx": _NUM, "cy": _NUM},
        },
        "target": {"type": "string", "minLength": 1},
        "estimator": {"enum": ["epnp+gn", "epnp"]},
        "distance_source": {"enum": ["true", "estimated"]},
        "base_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
}


@dataclass(frozen=True)
class RunConfig:
    depths: tuple[float, ...] = (200.0, 400.0, 600.0, 800.0, 1000.0)
    off_axes: tuple[float, ...] = (0.0, 50.0, 100.0)
    orientation_bound: float = 20.0
    repeats: int = 20
    pixel_sigma: float = 1.0
    success_pos_threshold: float = 5.0
    success_ori_threshold: float = 5.0
    handeye_perturb: tuple[float, float] = (0.0, 0.0)
    actuation_noise: tuple[float, float] = (0.0, 0.0)
    thresholds: GatingThresholds = field(default_factory=GatingThresholds)
    intrinsics: Intrinsics = field(default_factory=Intrinsics)
    target: str = "box"
    estimator: str = "epnp+gn"
    distance_source: str = "true"
    base_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "depths": list(self.depths),
            "off_axes": list(self.off_axes),
            "orientation_bound": self.orientation_bound,
            "repeats": self.repeats,
            "pixel_sigma": self.pixel_sigma,
            "success_pos_threshold": self.success_pos_threshold,
            "success_ori_threshold": self.success_ori_threshold,
            "handeye_perturb": list(self.handeye_perturb),
            "actuation_noise": list(self.actuation_noise),
            "thresholds": self.thresholds.to_dict(),
            "intrinsics": self.intrinsics.to_dict(),
            "target": self.target,
            "estimator": self.estimator,
            "distance_source": self.distance_source,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        """Validate and build; missing keys take their defaults.

        Raises:
            ConfigError: naming the first offending field.
        """
        validate(d)
        merged = cls().to_dict()
        for key, value in d.items():
            if isinstance(value, dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return cls(
            depths=tuple(float(x) for x in merged["depths"]),
            off_axes=tuple(float(x) for x in merged["off_axes"]),
            orientation_bound=float(merged["orientation_bound"]),
            repeats=int(merged["repeats"]),
            pixel_sigma=float(merged["pixel_sigma"]),
            success_pos_threshold=float(merged["success_pos_threshold"]),
            success_ori_threshold=float(merged["success_ori_threshold"]),
            handeye_perturb=tuple(float(x) for x in merged["handeye_perturb"]),
            actuation_noise=tuple(float(x) for x in merged["actuation_noise"]),
            thresholds=GatingThresholds(**merged["thresholds"]),
            intrinsics=Intrinsics(**{k: float(v) for k, v in merged["intrinsics"].items()}),
            target=merged["target"],
            estimator=merged["estimator"],
            distance_source=merged["distance_source"],
            base_seed=int(merged["base_seed"]),
        )

    def grid(self) -> list[Scenario]:
        return standard_grid(
            self.depths,
            self.off_axes,
            orientation_bound=self.orientation_bound,
            pixel_sigma=self.pixel_sigma,
            handeye_perturb=self.handeye_perturb,
            success_pos_threshold=self.success_pos_threshold,
            success_ori_threshold=self.success_ori_threshold,
            actuation_noise=self.actuation_noise,
        )

    def load_target(self) -> TargetModel:
        try:
            return load_target(self.target)
        except (OSError, ExecGateError) as exc:
            raise ConfigError("target", str(exc)) from None


def validate(d: dict) -> None:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    error = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(d))
    if error is None:
        return
    path = ".".join(str(p) for p in error.absolute_path)
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        path = ".".join(filter(None, [path, extra[0] if extra else ""]))
    raise ConfigError(path or "<root>", error.message)


def set_path(d: dict, dotted: str, value) -> dict:
    """Return a copy of ``d`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(d)
    node = out
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, f"{p} is not an object")
    node[leaf] = value
    return out


def load_config(path: str | Path, overrides: list[tuple[str, object]] | None = None) -> tuple[RunConfig, dict]:
    """Parse a config file; returns the validated config and its raw JSON (with overrides applied)."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}:{exc.lineno}: {exc.msg}") from None
    for key, value in overrides or []:
        raw = set_path(raw, key, value)
    return RunConfig.from_dict(raw), raw
