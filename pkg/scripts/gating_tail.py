"""Paired tail-risk comparison, gated vs ungated, for several gating actions.

Restricts the grid to depth >= 600 mm. Reports P95 and max position error,
success rate, and the mean commanded step length for each action.
"""

import argparse

import numpy as np

from execgate.gating import GatingThresholds, Strategy
from execgate.metrics import nearest_rank
from execgate.simulator import standard_grid, run_sweep

ACTIONS = {
    "scale a=0.5": GatingThresholds(),
    "scale a=0.9": GatingThresholds(alpha=0.9),
    "scale a=0.99": GatingThresholds(alpha=0.99),
    "reject": GatingThresholds(strategy=Strategy.REJECT),
}


def row(name, outs):
    pos = [o.pos_err for o in outs]
    rate = 100.0 * sum(o.success for o in outs) / len(outs)
    step = np.nanmean([o.step_mm for o in outs])
    gated = sum(o.gated for o in outs)
    print(f"{name:>14} {len(outs):5d} {gated:6d} {rate:9.1f} {nearest_rank(pos, 0.95):9.2f} {max(pos):9.2f} {step:9.1f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=112)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    grid = standard_grid(depths=(600.0, 800.0, 1000.0))
    print(f"{'action':>14} {'n':>5} {'gated':>6} {'success_%':>9} {'p95_mm':>9} {'max_mm':>9} {'step_mm':>9}")
    for i, (name, th) in enumerate(ACTIONS.items()):
        out = run_sweep(grid, args.repeats, args.seed, thresholds=th)
        if i == 0:
            row("ungated", [o for o in out if o.mode == "off"])
        row(name, [o for o in out if o.mode == "on"])


if __name__ == "__main__":
    main()
