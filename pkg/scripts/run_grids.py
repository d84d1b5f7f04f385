"""Run the built-in experiment grids and print the fitted laws.

This is the programmatic twin of `pclab reproduce-paper`: same presets,
same seeding, but it keeps the tables in memory and prints a compact
summary instead of writing the full artifact set.  Pass --out to persist
the per-trial and aggregate CSVs as well.

Typical desk run (a couple of minutes):

    python3 scripts/run_grids.py --scale desk --workers 4

Full-size grids take hours; start them with nohup and check back.
"""

import argparse
import dataclasses
import sys
import time

from pclab.analysis import (
    compare_bounds,
    eps_series_by_n,
    fit_eps_dependence,
    fit_nlnn_offset,
    fit_thd,
    thd_series,
)
from pclab.experiments import (
    persist,
    persist_aggregate,
    reproduce_paper_configs,
    run_experiment,
)


def parse_scale(text):
    return text if text == "desk" else float(text)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=parse_scale, default="desk",
                    help='"desk" for the reduced preset, or a trial-count '
                         "multiplier in (0, 1] for the full grids")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=None,
                    help="override the per-cell trial count")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, metavar="DIR",
                    help="also write <model>_trials.csv / _aggregate.csv here")
    args = ap.parse_args(argv)

    if args.out is not None:
        import pathlib

        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)

    tables = {}
    for config in reproduce_paper_configs(args.seed, args.scale):
        if args.trials is not None:
            config = dataclasses.replace(config, trials=args.trials)
        name = config.model if config.model != "box" else f"box_d{config.dim}"
        t0 = time.perf_counter()
        table = run_experiment(config, workers=args.workers)
        print(f"[{name}] {len(table.rows)} trials in "
              f"{time.perf_counter() - t0:.1f}s", file=sys.stderr)
        tables[name] = table
        if args.out is not None:
            persist(table, out / f"{name}_trials.csv")
            persist_aggregate(table, out / f"{name}_aggregate.csv")

    for name, table in tables.items():
        print(f"\n== {name} ==")
        exceeded = [r for r in compare_bounds(table.cells) if r.exceeded]
        print(f"cells above their bound: {len(exceeded)}")
        series = eps_series_by_n(table.cells)
        fits = {n: fit_eps_dependence(n, s)
                for n, s in series.items() if len(set(e for e, _ in s)) >= 3}
        for n in sorted(fits):
            f = fits[n]
            print(f"  N={n:5d}  T ~ -3 c N ln(eps) + e   c={f.c:.4f}  e={f.e:.2f}")
        if len(fits) >= 4:
            off = fit_nlnn_offset([(n, fits[n].e) for n in sorted(fits)])
            print(f"  offsets: e(N) ~ {off.a:.3f} N ln N {off.b:+.3f} N {off.f:+.2f}")
        if name == "circle":
            absorbed = thd_series(table.cells)
            if len(absorbed) >= 3:
                hd = fit_thd(absorbed)
                print(f"  half-disk: T_HD(N) ~ {hd.a:.3f} N ln N {hd.f:+.2f}"
                      f"  (residual sign runs: {hd.residual_sign_runs})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
