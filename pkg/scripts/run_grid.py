"""Run the 5 x 3 depth/off-axis grid in both gating modes and print the report tables."""

import argparse
import sys
import time

from execgate.metrics import render_tables, report_tables
from execgate.simulator import standard_grid, run_sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sigma", type=float, default=1.0, help="pixel noise (px)")
    ap.add_argument("--format", choices=("md", "csv", "json"), default="md")
    args = ap.parse_args()

    t0 = time.perf_counter()
    out = run_sweep(standard_grid(pixel_sigma=args.sigma), args.repeats, args.seed)
    print(f"{len(out)} trials in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    sys.stdout.write(render_tables(report_tables(out), args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
