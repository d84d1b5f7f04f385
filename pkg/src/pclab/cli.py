"""Command-line front end for simulation runs, bound tables, and fits.

Subcommands
-----------
simulate          run one JSON-configured grid -> trial CSV + aggregate CSV
bounds            evaluate one closed-form bound, print a machine-readable row
markov            worst-case absorption chain: closed form vs solver
fit               regression fits + bound comparison from aggregate CSVs
check-identities  exact circle identities on random configurations
reproduce-paper   built-in experiment grids end to end, optionally scaled

Exit codes: 0 success, 1 property failure, 2 usage or config error, 3 IO
error.  The master seed resolves as: --seed flag, then the config file,
then the PCL_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import re
import sys

import numpy as np

from . import __version__
from .analysis import (
    compare_bounds,
    eps_series_by_n,
    fit_eps_dependence,
    fit_nlnn_offset,
    fit_report,
    fit_thd,
    thd_series,
)
from .bounds import (
    contraction_factor,
    edsm_bounds,
    expected_lyapunov,
    gossip_time_bound,
    t_eps_bound_circle,
    t_eps_bound_interval,
    t_eps_bound_scalar,
    t_eps_bound_uniform_init,
    t_eps_bound_vector,
    t_hd_bound,
)
from .dynamics import TWO_PI
from .experiments import (
    _atomic_write,
    _fmt,
    assert_no_cap_exhaustion,
    config_from_dict,
    load_aggregate_csv,
    persist,
    persist_aggregate,
    reproduce_paper_configs,
    run_experiment,
)
from .markov import (
    absorption_asymptotic,
    absorption_closed_form,
    absorption_solve,
    chain_c,
)
from .observables import (
    circle_identity_residuals,
    one_step_drift_closed_form,
    vector_sum,
)

_FORMULAS = (
    "contraction",
    "expected-lyapunov",
    "t-eps-scalar",
    "t-eps-interval",
    "t-eps-uniform",
    "t-eps-box-worst",
    "t-eps-box-uniform",
    "gossip",
    "edsm",
    "t-hd",
    "circle",
)

COMPARISON_HEADER = "model,N,D,epsilon,t_hat,bound,slack,ratio,exceeded"


def _env_seed():
    raw = os.environ.get("PCL_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"PCL_SEED must be an integer, got {raw!r}") from None


def _resolve_seed(cli_seed, config_seed=None) -> int:
    if cli_seed is not None:
        return cli_seed
    if config_seed is not None:
        return int(config_seed)
    env = _env_seed()
    if env is not None:
        return env
    return 0


def _default_workers() -> int:
    return os.cpu_count() or 1


def _log_resolved(config, workers: int) -> None:
    doc = dict(dataclasses.asdict(config), workers=workers)
    print(f"resolved config: {json.dumps(doc)}", file=sys.stderr)


# ------------------------------------------------------------------ simulate


def _cmd_simulate(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    doc["master_seed"] = _resolve_seed(args.seed, doc.get("master_seed"))
    if args.trials is not None:
        doc["trials"] = args.trials
    config = config_from_dict(doc)
    workers = args.workers if args.workers is not None else _default_workers()
    _log_resolved(config, workers)

    table = run_experiment(config, workers=workers)

    ext = "json" if args.format == "json" else "csv"
    trials_path = f"{args.output}_trials.{ext}"
    agg_path = f"{args.output}_aggregate.csv"
    persist(table, trials_path, format=args.format)
    persist_aggregate(table, agg_path)
    resolved = {
        "_header": {
            "tool": "pclab",
            "version": __version__,
            "seed": config.master_seed,
        },
        "config": dataclasses.asdict(config),
        "workers": workers,
        "outputs": {"trials": trials_path, "aggregate": agg_path},
    }
    _atomic_write(f"{args.output}_config.json", json.dumps(resolved, indent=2) + "\n")

    capped = sum(c.cap_exhausted for c in table.cells)
    if capped:
        print(
            f"warning: {capped} trial(s) exhausted the step cap and were "
            "excluded from the estimators",
            file=sys.stderr,
        )
    return 0


# -------------------------------------------------------------------- bounds


def _need(args, formula: str, *names):
    missing = [
        "--" + name.replace("_", "-")
        for name in names
        if getattr(args, name) is None
    ]
    if missing:
        raise ValueError(f"formula {formula} requires {', '.join(missing)}")
    return [getattr(args, name) for name in names]


def _cmd_bounds(args) -> int:
    f = args.formula
    if f == "contraction":
        (n,) = _need(args, f, "n")
        rows = [(f, {"n": n}, contraction_factor(n), None)]
    elif f == "expected-lyapunov":
        n, k, l0 = _need(args, f, "n", "k", "l0")
        rows = [(f, {"n": n, "k": k, "l0": l0}, expected_lyapunov(k, l0, n), None)]
    elif f == "t-eps-scalar":
        n, eps, l0 = _need(args, f, "n", "eps", "l0")
        tb = t_eps_bound_scalar(n, eps, l0)
        inputs = {"n": n, "eps": eps, "l0": l0}
        if tb.clamped:
            inputs["clamped"] = 1
        rows = [(f, inputs, tb.exact, tb.simplified)]
    elif f in ("t-eps-interval", "t-eps-uniform"):
        n, eps, a, b = _need(args, f, "n", "eps", "a", "b")
        fn = t_eps_bound_interval if f == "t-eps-interval" else t_eps_bound_uniform_init
        tb = fn(n, eps, a, b)
        inputs = {"n": n, "eps": eps, "a": a, "b": b}
        if tb.clamped:
            inputs["clamped"] = 1
        rows = [(f, inputs, tb.exact, tb.simplified)]
    elif f in ("t-eps-box-worst", "t-eps-box-uniform"):
        n, dim, eps, a, b = _need(args, f, "n", "dim", "eps", "a", "b")
        tb = t_eps_bound_vector(
            n, dim, eps, a=a, b=b, uniform_init=(f == "t-eps-box-uniform")
        )
        inputs = {"n": n, "dim": dim, "eps": eps, "a": a, "b": b}
        if tb.clamped:
            inputs["clamped"] = 1
        rows = [(f, inputs, tb.exact, tb.simplified)]
    elif f == "gossip":
        n, eps, a, b = _need(args, f, "n", "eps", "a", "b")
        gb = gossip_time_bound(n, eps, a, b)
        inputs = {"n": n, "eps": eps, "a": a, "b": b, "q": gb.q}
        rows = [(f, inputs, gb.exact, gb.simplified)]
    elif f == "edsm":
        alpha, eps = _need(args, f, "alpha", "eps")
        eb = edsm_bounds(alpha, eps)
        # the direct value is the sharp one; the +1/alpha form is the relaxation
        rows = [(f, {"alpha": alpha, "eps": eps}, eb.direct, eb.conservative)]
    elif f == "t-hd":
        (n,) = _need(args, f, "n")
        lv = t_hd_bound(n) if args.delta is None else t_hd_bound(n, args.delta)
        inputs = {"n": n}
        if args.delta is not None:
            inputs["delta"] = args.delta
        rows = [("t-hd", inputs, lv.value, None), ("t-hd-log10", inputs, lv.log10, None)]
    else:  # circle
        n, eps = _need(args, f, "n", "eps")
        inputs = {"n": n, "eps": eps}
        if args.b_hd is not None:
            inputs["b_hd"] = args.b_hd
        rows = [(f, inputs, t_eps_bound_circle(n, eps, b_hd=args.b_hd), None)]

    print("formula,inputs,exact,simplified")
    for name, inputs, exact, simplified in rows:
        ins = ";".join(f"{k}={_fmt(v)}" for k, v in inputs.items())
        print(f"{name},{ins},{_fmt(exact)},{_fmt(simplified)}")
    return 0


# -------------------------------------------------------------------- markov


def _cmd_markov(args) -> int:
    if args.from_agents is not None:
        if args.n is not None or args.c is not None:
            raise ValueError("use either --n/--c or --from-agents, not both")
        n = args.from_agents // 2
        c = chain_c(args.from_agents)
    elif args.n is not None and args.c is not None:
        n, c = args.n, args.c
    else:
        raise ValueError("markov needs --n and --c together, or --from-agents")

    if args.closed_form_only:
        closed = absorption_closed_form(n, c)
        print("n,c,closed")
        print(f"{n},{_fmt(float(c))},{_fmt(closed)}")
        return 0

    solve = float(absorption_solve(n, c)[0])
    if c < 0.5:
        closed = absorption_closed_form(n, c)
        asym = absorption_asymptotic(n, c)
        gap = abs(closed - solve) / solve
        tail = [closed, solve, asym.value, asym.log10, gap]
    else:
        tail = [None, solve, None, None, None]
    print("n,c,closed,solve,asymptotic,asymptotic_log10,rel_gap")
    print(f"{n},{_fmt(float(c))}," + ",".join(_fmt(v) for v in tail))
    return 0


# ----------------------------------------------------------------------- fit


def _seed_from_comment(path):
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError:
        return None
    match = re.search(r"seed=(\d+)", first)
    return int(match.group(1)) if match else None


def _fit_document(records, seed) -> dict:
    groups = {}
    for rec in records:
        groups.setdefault((rec["model"], rec["D"]), []).append(rec)

    out_groups = []
    for (model, dim), cells in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)
    ):
        usable = [c for c in cells if c["t_hat_mean"] is not None]
        eps_fits = []
        for n, series in sorted(eps_series_by_n(usable).items()):
            if len({eps for eps, _ in series}) < 3:
                continue
            res = fit_eps_dependence(n, series)
            eps_fits.append(
                {"n": n, "g": res.g, "e": res.e, "c": res.c, "report": fit_report(res)}
            )
        offset_doc = None
        if len(eps_fits) >= 4:
            off = fit_nlnn_offset([(d["n"], d["e"]) for d in eps_fits])
            offset_doc = {"a": off.a, "b": off.b, "f": off.f, "report": fit_report(off)}
        thd_doc = None
        if model == "circle":
            series = thd_series(cells)
            if len(series) >= 3:
                res = fit_thd(series)
                thd_doc = {
                    "a": res.a,
                    "f": res.f,
                    "residual_sign_runs": res.residual_sign_runs,
                    "report": fit_report(res),
                }
        comps = compare_bounds(usable)
        comparison = {
            "cells": len(comps),
            "exceeded": sum(1 for r in comps if r.exceeded),
            "min_slack": min((r.slack for r in comps), default=None),
            "min_ratio": min((r.ratio for r in comps), default=None),
            "skipped_cells": len(cells) - len(usable),
        }
        out_groups.append(
            {
                "model": model,
                "dim": dim,
                "cells": len(cells),
                "eps_fits": eps_fits,
                "offset_fit": offset_doc,
                "thd_fit": thd_doc,
                "comparison": comparison,
            }
        )
    return {
        "_header": {"tool": "pclab", "version": __version__, "seed": seed},
        "groups": out_groups,
    }


def _cmd_fit(args) -> int:
    records = []
    seed = None
    for path in args.csv:
        records.extend(load_aggregate_csv(path))
        if seed is None:
            seed = _seed_from_comment(path)
    doc = _fit_document(records, seed)
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        _atomic_write(args.output, text)
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------- check-identities


def _cmd_check_identities(args) -> int:
    seed = _resolve_seed(args.seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    n_choices = (3, 10, 50)
    worst = 0.0
    for index in range(args.configs):
        n = int(n_choices[rng.integers(len(n_choices))])
        theta = rng.uniform(0.0, TWO_PI, n)
        tol = args.tol * n * n

        res = circle_identity_residuals(theta)
        drift, next_sq = one_step_drift_closed_form(theta)
        _, norm = vector_sum(theta)
        # the two moments determine E|S'-S|^2, which must be nonnegative,
        # and E|S'|^2 can never exceed N^2
        step_sq = next_sq - norm * norm - 2.0 * drift
        checks = (
            ("norm", res.norm_residual),
            ("cos-pair", res.cos_pair_residual),
            ("cos-double", res.cos_double_residual),
            ("step-sq-negative", max(0.0, -step_sq)),
            ("next-sq-above-cap", max(0.0, next_sq - float(n * n))),
        )
        for name, value in checks:
            if value is None:
                continue
            if value > tol:
                print(
                    f"identity violation at config {index}: {name} residual "
                    f"{value!r} exceeds {tol!r} (N={n})",
                    file=sys.stderr,
                )
                print(f"theta = {theta.tolist()!r}", file=sys.stderr)
                return 1
            worst = max(worst, value / (n * n))
    print(
        f"{args.configs} configurations checked; "
        f"max residual/N^2 = {worst:.3e}; all within tolerance"
    )
    return 0


# ------------------------------------------------------------ reproduce-paper


def _comparison_csv(comps, config) -> str:
    lines = [
        f"# pclab {__version__} seed={config.master_seed}",
        COMPARISON_HEADER,
    ]
    for r in comps:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (r.model, r.n, r.dim, r.eps, r.t_hat, r.bound, r.slack,
                          r.ratio, r.exceeded)
            )
        )
    return "\n".join(lines) + "\n"


def _cmd_reproduce(args) -> int:
    seed = _resolve_seed(args.seed)
    scale = args.scale
    if scale != "desk":
        try:
            scale = float(scale)
        except ValueError:
            raise ValueError(f"unknown scale preset {args.scale!r}") from None
    configs = reproduce_paper_configs(seed, scale)
    if args.trials is not None:
        configs = [dataclasses.replace(c, trials=args.trials) for c in configs]
    workers = args.workers if args.workers is not None else _default_workers()
    os.makedirs(args.output, exist_ok=True)

    records = []
    config_docs = []
    for config in configs:
        name = config.model if config.model != "box" else f"box_d{config.dim}"
        _log_resolved(config, workers)
        table = run_experiment(config, workers=workers)
        assert_no_cap_exhaustion(table)
        agg_path = os.path.join(args.output, f"{name}_aggregate.csv")
        persist(table, os.path.join(args.output, f"{name}_trials.csv"))
        persist_aggregate(table, agg_path)
        comps = compare_bounds(table.cells)
        _atomic_write(
            os.path.join(args.output, f"{name}_comparison.csv"),
            _comparison_csv(comps, config),
        )
        records.extend(load_aggregate_csv(agg_path))
        config_docs.append(dataclasses.asdict(config))
        exceeded = sum(1 for r in comps if r.exceeded)
        print(f"{name}: {len(table.cells)} cells, {exceeded} above their bound")

    _atomic_write(
        os.path.join(args.output, "fits.json"),
        json.dumps(_fit_document(records, seed), indent=2) + "\n",
    )
    _atomic_write(
        os.path.join(args.output, "configs.json"),
        json.dumps(
            {
                "_header": {"tool": "pclab", "version": __version__, "seed": seed},
                "scale": args.scale,
                "workers": workers,
                "configs": config_docs,
            },
            indent=2,
        )
        + "\n",
    )
    print(f"wrote {len(configs)} result sets to {args.output}")
    return 0


# ------------------------------------------------------------------- parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pclab",
        description="pairwise-consensus simulation lab: runs, bounds, fits",
    )
    parser.add_argument(
        "--version", action="version", version=f"pclab {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one JSON-configured grid")
    sim.add_argument("--config", required=True, help="JSON config path")
    sim.add_argument("--seed", type=int, help="master seed override")
    sim.add_argument("--trials", type=int, help="trials-per-cell override")
    sim.add_argument("--workers", type=int, help="process count (default: all cores)")
    sim.add_argument("--output", default="run", help="output path prefix")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")

    bnd = sub.add_parser("bounds", help="evaluate one closed-form bound")
    bnd.add_argument("--formula", required=True, choices=_FORMULAS)
    bnd.add_argument("--n", type=int)
    bnd.add_argument("--dim", type=int)
    bnd.add_argument("--k", type=int)
    bnd.add_argument("--eps", type=float)
    bnd.add_argument("--a", type=float)
    bnd.add_argument("--b", type=float)
    bnd.add_argument("--l0", type=float)
    bnd.add_argument("--alpha", type=float)
    bnd.add_argument("--delta", type=float)
    bnd.add_argument("--b-hd", type=float, dest="b_hd")

    mkv = sub.add_parser("markov", help="worst-case absorption chain values")
    mkv.add_argument("--n", type=int)
    mkv.add_argument("--c", type=float)
    mkv.add_argument("--from-agents", type=int, dest="from_agents")
    mkv.add_argument("--closed-form-only", action="store_true")

    fit = sub.add_parser("fit", help="fits + bound comparison from aggregate CSVs")
    fit.add_argument("csv", nargs="+", help="aggregate CSV paths")
    fit.add_argument("--output", help="write the JSON report here (default: stdout)")

    chk = sub.add_parser("check-identities", help="exact circle identity suite")
    chk.add_argument("--configs", type=int, default=1000)
    chk.add_argument("--seed", type=int)
    chk.add_argument("--tol", type=float, default=1e-9,
                     help="per-config tolerance is tol*N^2")

    rep = sub.add_parser("reproduce-paper", help="run the built-in grids")
    rep.add_argument("--scale", default="1.0",
                     help="trial multiplier in (0,1], or 'desk'")
    rep.add_argument("--seed", type=int)
    rep.add_argument("--trials", type=int, help="trials-per-cell override")
    rep.add_argument("--workers", type=int)
    rep.add_argument("--output", default="paper-out", help="output directory")

    return parser


_DISPATCH = {
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
    "markov": _cmd_markov,
    "fit": _cmd_fit,
    "check-identities": _cmd_check_identities,
    "reproduce-paper": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
