"""Command-line entry point.

Exit codes: 0 success, 2 user or input error, 3 environment error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .camera import project
from .config import CONFIG_SCHEMA, RunConfig, load_config
from .errors import ExecGateError
from .gating import evaluate, gate
from .metrics import FORMATS, GROUP_KEYS, nearest_rank, render_tables, render_trials_csv, report_tables
from .pnp import estimator_by_name
from .records import make_header, read_records, write_records
from .se3 import Pose, log_rotation
from .simulator import MODES, execute, mix_seed, perceive, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_ENV = 0, 2, 3


class _Usage(Exception):
    pass


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _parse_set(items: list[str] | None) -> list[tuple[str, object]]:
    out = []
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise _Usage(f"--set expects key=value, got {item!r}")
        try:
            out.append((key, json.loads(value)))
        except json.JSONDecodeError:
            out.append((key, value))
    return out


def _parse_modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    if not modes or any(m not in MODES for m in modes):
        raise _Usage(f"--modes must be a comma-separated subset of {','.join(MODES)}, got {text!r}")
    return modes


def cmd_sweep(args) -> int:
    cfg, raw = load_config(args.config, _parse_set(args.set))
    seed = cfg.base_seed if args.seed is None else args.seed
    modes = _parse_modes(args.modes)
    target = cfg.load_target()
    outcomes = run_sweep(
        cfg.grid(),
        cfg.repeats,
        seed,
        modes,
        estimator=estimator_by_name(cfg.estimator),
        thresholds=cfg.thresholds,
        target=target,
        k=cfg.intrinsics,
        distance_source=cfg.distance_source,
    )
    header = make_header(cfg.to_dict(), seed, [m for m in MODES if m in modes], target.points)
    try:
        write_records(args.out, header, outcomes)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc.strerror}")
        return EXIT_ENV
    if not args.quiet:
        print(f"wrote {len(outcomes)} trials to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    _, outcomes = read_records(args.records)
    if not outcomes:
        raise _Usage(f"{args.records}: no trial records")
    if args.format == "csv" and args.group is None:
        sys.stdout.write(render_trials_csv(outcomes))
    else:
        sys.stdout.write(render_tables(report_tables(outcomes, args.group), args.format))
    return EXIT_OK


def _fmt_pose(p: Pose) -> str:
    rv = np.degrees(log_rotation(p.rotation))
    return f"rotvec_deg=[{rv[0]:.4f}, {rv[1]:.4f}, {rv[2]:.4f}] t_mm=[{p.translation[0]:.4f}, {p.translation[1]:.4f}, {p.translation[2]:.4f}]"


def cmd_trial(args) -> int:
    cfg, _ = load_config(args.config, _parse_set(args.set))
    grid = cfg.grid()
    if not 0 <= args.scenario < len(grid):
        raise _Usage(f"--scenario must be in [0, {len(grid) - 1}], got {args.scenario}")
    if not 0 <= args.repeat < cfg.repeats:
        raise _Usage(f"--repeat must be in [0, {cfg.repeats - 1}], got {args.repeat}")
    s = grid[args.scenario]
    seed = mix_seed(cfg.base_seed if args.seed is None else args.seed, args.scenario, args.repeat)
    target = cfg.load_target()
    k = cfg.intrinsics
    th = cfg.thresholds
    p = perceive(s, estimator_by_name(cfg.estimator), target, k, np.random.default_rng(seed), cfg.distance_source)
    out = print
    out(f"trial scenario={args.scenario} repeat={args.repeat} seed={seed}")
    out(f"scenario: depth={s.depth:g} mm off_axis={s.off_axis:g} mm orientation_bound={s.orientation_bound:g} deg sigma={s.pixel_sigma:g} px")
    out(f"true cam_from_target: {_fmt_pose(p.chain.cam_from_target)}")
    if args.verbose:
        clean = project(k, p.chain.cam_from_target, target)
        for i, (a, b) in enumerate(zip(clean, p.correspondences.pixels)):
            out(f"  point {i}: projected=({a[0]:.3f}, {a[1]:.3f}) observed=({b[0]:.3f}, {b[1]:.3f})")
    if p.error is not None:
        out(f"[1] estimate: FAILED ({p.error})")
        return EXIT_OK
    out(f"[1] estimate cam_from_target: {_fmt_pose(p.estimate.cam_from_target)}")
    trace = p.estimate.trace.residuals
    out(f"[2] e_rep={p.e_rep:.6f} px  r_gn={trace[-1]:.6f} px  iterations={len(trace) - 1}  gamma={p.gamma:.4f}")
    if args.verbose:
        out("    residual trace: " + ", ".join(f"{r:.6g}" for r in trace))
    report = evaluate(p.e_rep, p.estimate.trace, p.gamma, th)
    dr = "n/a" if report.delta_r is None else f"{report.delta_r:.3e}"
    out(f"[3] delta_r={dr}  triggers: rep={report.rep_trigger} gn={report.gn_trigger} prox={report.prox_trigger}  reliable={report.reliable}")
    start = p.chain.base_from_ee
    commanded, decision = gate(report, start, start, p.new_target, th)
    if report.reliable:
        out("[4] reliable: execute the computed end-effector target")
        out("[5] gating action: none")
    else:
        out("[4] unreliable: skip direct execution")
        out(f"[5] gating action: strategy={th.strategy.value} -> {decision}")
    out(f"    desired ee target: {_fmt_pose(p.new_target)}")
    out(f"[6] executed ee pose: {_fmt_pose(commanded)}")
    for mode, t in (("off", None), ("on", th)):
        o = execute(p, s, t, report_thresholds=th, actuation_rng=np.random.default_rng([seed, 1]), seed=seed)
        out(f"result gating={mode}: pos_err={o.pos_err:.4f} mm ori_err={o.ori_err:.4f} deg success={o.success}")
    return EXIT_OK


def _select(outcomes, mode: str | None):
    return [o for o in outcomes if mode is None or o.mode == mode]


def cmd_compare(args) -> int:
    _, a = read_records(args.a)
    _, b = read_records(args.b)
    a, b = _select(a, args.mode_a), _select(b, args.mode_b)
    use_mode = args.mode_a is None and args.mode_b is None

    def keyed(outcomes):
        return {(o.scenario_id, o.repeat_id, o.seed) + ((o.mode,) if use_mode else ()): o for o in outcomes}

    ka, kb = keyed(a), keyed(b)
    if not ka or set(ka) != set(kb):
        missing_b = sorted(set(ka) - set(kb))
        missing_a = sorted(set(kb) - set(ka))
        lines = [f"record sets do not cover the same keys ({len(missing_b)} only in A, {len(missing_a)} only in B)"]
        lines += [f"  only in A: {k}" for k in missing_b[:20]]
        lines += [f"  only in B: {k}" for k in missing_a[:20]]
        raise _Usage("\n".join(lines))

    keys = sorted(ka)
    rows = []
    for k in keys:
        oa, ob = ka[k], kb[k]
        rows.append((k, ob.pos_err - oa.pos_err if math.isfinite(oa.pos_err) and math.isfinite(ob.pos_err) else math.nan,
                     ob.ori_err - oa.ori_err if math.isfinite(oa.ori_err) and math.isfinite(ob.ori_err) else math.nan,
                     int(oa.success), int(ob.success)))  # fmt: skip

    def stats(outs):
        pos = [o.pos_err for o in outs if math.isfinite(o.pos_err)]
        return (
            100.0 * sum(o.success for o in outs) / len(outs),
            nearest_rank(pos, 0.95) if pos else math.nan,
            max(pos) if pos else math.nan,
        )

    sa, sb = stats([ka[k] for k in keys]), stats([kb[k] for k in keys])
    names = ("success_rate_pct", "pos_p95_mm", "pos_max_mm")
    if args.format == "json":
        payload = {
            "summary": {n: {"a": x, "b": y, "delta": y - x} for n, x, y in zip(names, sa, sb)},
            "pairs": [
                {"key": list(k), "d_pos_err_mm": _j(dp), "d_ori_err_deg": _j(do), "success_a": s1, "success_b": s2}
                for k, dp, do, s1, s2 in rows
            ],
        }
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    sep = "," if args.format == "csv" else " | "
    print(sep.join(("metric", "a", "b", "delta_b_minus_a")))
    for n, x, y in zip(names, sa, sb):
        print(sep.join((n, f"{x:.2f}", f"{y:.2f}", f"{y - x:+.2f}")))
    print()
    print(sep.join(("key", "d_pos_err_mm", "d_ori_err_deg", "success_a", "success_b")))
    for k, dp, do, s1, s2 in rows:
        print(sep.join(("/".join(map(str, k)), f"{dp:+.4f}", f"{do:+.4f}", str(s1), str(s2))))
    return EXIT_OK


def _j(x: float):
    return x if math.isfinite(x) else None


def cmd_defaults(args) -> int:
    doc = CONFIG_SCHEMA if args.schema else RunConfig().to_dict()
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="execgate", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a seeded scenario sweep and write trial records")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modes", default="off,on", help="comma-separated subset of off,on")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry (dotted key, JSON value)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarise a record file")
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=FORMATS, default="md")
    p.add_argument("--group", choices=GROUP_KEYS, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("trial", help="trace one trial step by step")
    p.add_argument("--config", required=True)
    p.add_argument("--scenario", type=int, required=True)
    p.add_argument("--repeat", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("compare", help="paired differences between two record files (B minus A)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--mode-a", choices=MODES, default=None)
    p.add_argument("--mode-b", choices=MODES, default=None)
    p.add_argument("--format", choices=FORMATS, default="md")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("defaults", help="print the default configuration (or its JSON schema)")
    p.add_argument("--schema", action="store_true")
    p.set_defaults(func=cmd_defaults)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (_Usage, ExecGateError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except BrokenPipeError:
        sys.stderr.close()
        return EXIT_OK
    except FileNotFoundError as exc:
        _err(f"{exc.filename}: not found")
        return EXIT_USAGE
    except OSError as exc:
        _err(str(exc))
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
