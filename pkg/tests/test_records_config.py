import json
import math

import jsonschema
import pytest

from execgate.config import CONFIG_SCHEMA, RunConfig, load_config, set_path, validate
from execgate.errors import ConfigError
from execgate.gating import Strategy
from execgate.records import RecordError, dumps, make_header, outcome_from_dict, outcome_to_dict, read_records, write_records
from execgate.se3 import pose_distance
from execgate.simulator import Scenario, standard_grid, run_sweep


class TestConfig:
    def test_defaults_validate(self):
        jsonschema.validate(RunConfig().to_dict(), CONFIG_SCHEMA)
        assert RunConfig.from_dict(RunConfig().to_dict()) == RunConfig()

    def test_partial_merges_defaults(self):
        cfg = RunConfig.from_dict({"repeats": 3, "thresholds": {"strategy": "reject"}})
        assert cfg.repeats == 3 and cfg.thresholds.strategy is Strategy.REJECT and cfg.thresholds.alpha == 0.5

    def test_grid(self):
        g = RunConfig(depths=(300.0,), off_axes=(0.0, 10.0), pixel_sigma=0.5).grid()
        assert g == [Scenario(300, 0, pixel_sigma=0.5), Scenario(300, 10, pixel_sigma=0.5)]

    @pytest.mark.parametrize(
        "doc,field",
        [
            ({"repeats": 0}, "repeats"),
            ({"depths": []}, "depths"),
            ({"depths": [200, -5]}, "depths.1"),
            ({"thresholds": {"alpha": 0}}, "thresholds.alpha"),
            ({"thresholds": {"tau_x": 1}}, "thresholds.tau_x"),
            ({"colour": "red"}, "colour"),
            ({"estimator": "dlt"}, "estimator"),
        ],
    )
    def test_error_names_field(self, doc, field):
        with pytest.raises(ConfigError) as exc:
            validate(doc)
        assert exc.value.field == field

    def test_set_path(self):
        d = set_path({"a": {"b": 1}}, "a.c", 2)
        assert d == {"a": {"b": 1, "c": 2}}

    def test_load_bad_json(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text("{nope")
        with pytest.raises(ConfigError, match="c.json:1"):
            load_config(f)

    def test_bad_target(self):
        with pytest.raises(ConfigError) as exc:
            RunConfig(target="/no/such/file").load_target()
        assert exc.value.field == "target"


class TestRecords:
    def test_roundtrip_every_field(self, tmp_path):
        out = run_sweep(standard_grid(depths=(300, 1000), off_axes=(50,)), 2, 3)
        header = make_header(RunConfig().to_dict(), 3, ["off", "on"], [[0, 0, 0]])
        path = tmp_path / "r.ndjson"
        write_records(path, header, out)
        h, back = read_records(path)
        assert h == json.loads(json.dumps(header))
        assert len(back) == len(out)
        pose_keys = ("est_cam_from_target", "executed_ee")
        for a, b in zip(out, back):
            da, db = outcome_to_dict(a), outcome_to_dict(b)
            # quaternion -> matrix -> quaternion may move the last bit
            for k in pose_keys:
                assert da.pop(k)["rotation"] == pytest.approx(db.pop(k)["rotation"], abs=1e-15)
            assert da == db
            assert a.report == b.report
            assert pose_distance(a.executed_ee, b.executed_ee) == pytest.approx((0, 0), abs=1e-12)

    def test_sentinel_roundtrip(self):
        from execgate.simulator import TrialOutcome

        o = TrialOutcome(1, 2, 3, "off", 200.0, 0.0, math.inf, math.inf, False, None, None, error="LinAlgError: x")
        d = outcome_to_dict(o)
        assert d["pos_err_mm"] is None
        back = outcome_from_dict(json.loads(json.dumps(d)))
        assert back.pos_err == math.inf and back.error == o.error and math.isnan(back.step_mm)

    def test_dumps_is_strict_json(self):
        out = run_sweep(standard_grid(depths=(500,), off_axes=(0,)), 1, 0)
        text = dumps(make_header({}, 0, ["off", "on"], []), out)
        for line in text.splitlines():
            json.loads(line)
        assert "NaN" not in text and "Infinity" not in text

    @pytest.mark.parametrize(
        "text,line",
        [
            ("", 1),
            ('{"record": "trial"}\n', 1),
            ('{"record": "header", "format": "execgate-trials/1"}\n{bad\n', 2),
            ('{"record": "header", "format": "execgate-trials/1"}\n{"record": "trial"}\n', 2),
        ],
    )
    def test_corrupt(self, tmp_path, text, line):
        f = tmp_path / "bad.ndjson"
        f.write_text(text)
        with pytest.raises(RecordError) as exc:
            read_records(f)
        assert exc.value.line == line
