"""Distribution of the converged Gauss-Newton residual and its effect on the stagnation guard.

Prints percentiles of the final residual and of the last relative decrease at
a fixed pixel noise, then the fraction of trials whose residual-stability
trigger fires for several values of the residual floor.
"""

import argparse

import numpy as np

from execgate.camera import Intrinsics, default_target
from execgate.gating import GatingThresholds, evaluate
from execgate.pnp import GaussNewtonEstimator, residual_decrease
from execgate.simulator import Scenario, mix_seed, perceive


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1500)
    ap.add_argument("--sigma", type=float, default=1.0)
    args = ap.parse_args()

    target, k, est = default_target(), Intrinsics(), GaussNewtonEstimator()
    rng_s = np.random.default_rng(0)
    perceptions = []
    for i in range(args.trials):
        s = Scenario(depth=rng_s.uniform(200, 1000), off_axis=rng_s.choice([0.0, 50.0, 100.0]), pixel_sigma=args.sigma)
        perceptions.append(perceive(s, est, target, k, np.random.default_rng(mix_seed(0, i, 0))))
    r = np.array([p.estimate.trace.final for p in perceptions])
    dr = np.array([residual_decrease(p.estimate.trace) for p in perceptions])
    q = [5, 50, 95, 99]
    print("final residual (px) percentiles " + "  ".join(f"p{a}={v:.3f}" for a, v in zip(q, np.percentile(r, q))))
    print("last relative decrease percentiles " + "  ".join(f"p{a}={v:.2e}" for a, v in zip(q, np.percentile(dr, q))))
    print(f"{'tau_r_floor':>11} {'gn_trigger_%':>12}")
    for floor in (0.25, 0.5, 1.0, 1.25, 1.5):
        th = GatingThresholds(tau_r_floor=floor)
        fired = [evaluate(p.e_rep, p.estimate.trace, p.gamma, th).gn_trigger for p in perceptions]
        print(f"{floor:11.2f} {100 * np.mean(fired):12.1f}")


if __name__ == "__main__":
    main()
