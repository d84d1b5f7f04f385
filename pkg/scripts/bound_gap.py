# How loose are the closed-form stopping-time bounds in practice?
#
# For one model and one N, sweep epsilon, run a batch of trials per cell,
# and print measured mean first-hit step next to the simplified bound.
# The line/box bounds land within a factor of ~3-5 of the measurement;
# the circle bound is astronomically loose by construction and is only
# printed for scale.

import argparse
import sys

from pclab.analysis import compare_bounds
from pclab.experiments import ExperimentConfig, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", choices=("scalar", "box", "circle"), default="scalar")
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--dim", type=int, default=2, help="box only")
    ap.add_argument("--eps", type=float, nargs="+",
                    default=(1e-3, 1e-2, 1e-1))
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    config = ExperimentConfig(
        model=args.model,
        n_grid=(args.n,),
        eps_grid=tuple(args.eps),
        dim=args.dim if args.model == "box" else 1,
        trials=args.trials,
        master_seed=args.seed,
    )
    table = run_experiment(config, workers=args.workers)

    print(f"{'eps':>10}  {'measured':>12}  {'bound':>14}  {'ratio':>8}")
    for row in compare_bounds(table.cells):
        ratio = "inf" if row.ratio == float("inf") else f"{row.ratio:8.2f}"
        flag = "  <-- EXCEEDED" if row.exceeded else ""
        print(f"{row.eps:10.4g}  {row.t_hat:12.2f}  {row.bound:14.6g}  {ratio}{flag}")
    return 1 if any(r.exceeded for r in compare_bounds(table.cells)) else 0


if __name__ == "__main__":
    sys.exit(main())
