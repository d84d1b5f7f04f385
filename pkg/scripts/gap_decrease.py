# One-step behaviour of the largest angular gap on the circle.
#
# Whenever every gap is below pi (no half-disk yet), a single interaction
# can only shrink the largest gap with probability at most (1/2)(1 - 1/N):
# the chosen pair must straddle it and the resampled arc must cut into it.
# This script estimates that probability for random near-uniform
# configurations and prints it next to the cap.

import argparse
import math
import sys

import numpy as np

from pclab.dynamics import TWO_PI, mix_seed, step_circle
from pclab.observables import circular_gaps


def spread_config(rng, n):
    # equally spaced plus jitter keeps every gap well under pi/2
    jitter = rng.uniform(-0.3, 0.3, n) * (TWO_PI / (4 * n))
    return (np.arange(n) * (TWO_PI / n) + jitter) % TWO_PI


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--agents", type=int, nargs="+", default=(4, 8, 16, 32))
    ap.add_argument("--samples", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"{'N':>4}  {'gamma_max':>10}  {'P(decrease)':>12}  {'cap':>8}")
    worst = -math.inf
    for n in args.agents:
        rng = np.random.Generator(np.random.PCG64(mix_seed(args.seed, n)))
        theta0 = spread_config(rng, n)
        g0 = circular_gaps(theta0)[1]
        hits = 0
        for _ in range(args.samples):
            y = theta0.copy()
            step_circle(rng, y)
            if circular_gaps(y)[1] < g0:
                hits += 1
        p = hits / args.samples
        cap = 0.5 * (1.0 - 1.0 / n)
        worst = max(worst, p - cap)
        print(f"{n:4d}  {g0:10.4f}  {p:12.5f}  {cap:8.5f}")
    print(f"\nmax estimate-over-cap: {worst:+.5f} "
          f"(4 sigma ~ {4 * math.sqrt(0.25 / args.samples):.5f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
