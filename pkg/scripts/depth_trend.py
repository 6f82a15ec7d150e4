"""Ungated success rate and error percentiles versus depth at fixed pixel noise."""

import argparse

import numpy as np

from execgate.metrics import nearest_rank
from execgate.simulator import standard_grid, run_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=167, help="per off-axis value (3 values)")
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    depths = (200.0, 400.0, 600.0, 800.0, 1000.0)
    out = run_sweep(standard_grid(depths=depths, pixel_sigma=args.sigma), args.repeats, args.seed, ["off"])
    print(f"{'depth_mm':>8} {'n':>5} {'success_%':>9} {'median_mm':>9} {'p95_mm':>7} {'max_mm':>7}")
    for d in depths:
        pos = [o.pos_err for o in out if o.depth == d]
        ok = sum(o.success for o in out if o.depth == d)
        print(f"{d:8.0f} {len(pos):5d} {100 * ok / len(pos):9.1f} {np.median(pos):9.2f} {nearest_rank(pos, 0.95):7.2f} {max(pos):7.2f}")


if __name__ == "__main__":
    main()
