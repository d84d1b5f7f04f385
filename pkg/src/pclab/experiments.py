"""Monte Carlo harness: seeded trial grids, aggregation, and persistence.

A run walks the (N, epsilon) grid of an ExperimentConfig, executes
``trials`` independent trajectories per cell, and records the first-hit
step of each stopping rule together with end-state diagnostics.  Every
trial owns its own RNG stream derived from the master seed through
``seed_for_trial``, so results are identical for any worker count and any
execution order; rows are kept in (cell, trial) order before any floating
point reduction, which pins the summation order too.

Per-model stopping rules and recorded columns:

========  =======================  ============================  ===========
model     t_eps                    t_eps_prime                   t_hd
========  =======================  ============================  ===========
scalar    range <= eps             spread <= N eps^2             --
box       diameter <= eps          summed spread <= N eps^2      --
circle    arc gap >= 2 pi - eps    --                            half disk
========  =======================  ============================  ===========

Trials that exhaust the step cap are counted per cell and excluded from
the estimators; they are never silently averaged in.  The cap defaults to
10x the cell's closed-form simplified bound (clipped, see
``stopping.default_step_cap``) and can be forced via ``step_cap``.

CSV files open with a ``# pclab <version> seed=<seed>`` comment, then the
exact schema header.  Floats are rendered with ``repr`` so a write/read
cycle reproduces every bit.  The vector mean of a box state does not fit
the scalar ``final_mean`` column and is left empty, as are all other
non-applicable cells.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import t_eps_bound_circle, t_eps_bound_uniform_init, t_eps_bound_vector
from .dynamics import (
    TWO_PI,
    BoxDomain,
    CircleDomain,
    IntervalDomain,
    init_uniform,
    mix_seed,
    run_trajectory,
)
from .observables import (
    circular_gaps,
    lyapunov_per_dimension,
    lyapunov_scalar,
    mean_state,
    range_scalar,
    range_vector,
)
from .stopping import (
    CircleArc,
    HalfDisk,
    LyapunovThreshold,
    MaxSteps,
    RangeThreshold,
    default_step_cap,
)

__all__ = [
    "TRIAL_HEADER",
    "AGGREGATE_HEADER",
    "AggregateStats",
    "CellAggregate",
    "ExperimentConfig",
    "ResultTable",
    "TrialRow",
    "aggregate",
    "assert_no_cap_exhaustion",
    "config_from_dict",
    "load_aggregate_csv",
    "load_trials_csv",
    "persist",
    "persist_aggregate",
    "reproduce_paper_configs",
    "run_experiment",
    "seed_for_trial",
]

_MODELS = ("scalar", "box", "circle")
_MODEL_IDS = {"scalar": 1, "box": 2, "circle": 3}
_MAX_ARC_EPS = 2.0 * math.pi / 3.0

TRIAL_HEADER = (
    "model,N,D,epsilon,trial,seed,t_eps,t_eps_prime,t_hd,"
    "steps_cap_hit,final_range,final_lyapunov,final_mean"
)
AGGREGATE_HEADER = (
    "model,N,D,epsilon,trials,t_hat_mean,t_hat_std,t_hat_stderr,"
    "thd_hat_mean,thd_hat_std,bound_exact,bound_simplified"
)

# grids used for the published experiments
PAPER_N_LINE = (5, 10, 100, 250, 500, 750, 1000)
PAPER_EPS_LINE = (1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1)
PAPER_N_BOX = (5, 10, 50, 100, 250)
PAPER_DIMS_BOX = (2, 3, 4)
PAPER_EPS_BOX = (5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1)
PAPER_TRIALS = 1000

_DESK_N_LINE = (5, 10, 100, 250)
_DESK_N_BOX = (5, 10, 50)
_DESK_DIMS_BOX = (2, 3)
_DESK_TRIALS = 25


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid of Monte Carlo cells for a single model.

    ``step_cap`` forces a fixed cap on every cell; when None each cell gets
    10x its simplified closed-form bound.  ``observe_every`` > 0 attaches a
    per-trial contraction trace (step, spread) -- (step, arc span) on the
    circle -- sampled at that cadence; traces ride along in JSON output only.
    """

    model: str
    n_grid: tuple
    eps_grid: tuple
    dim: int = 1
    a: float = 0.0
    b: float = 1.0
    trials: int = 1000
    master_seed: int = 0
    step_cap: Optional[int] = None
    observe_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        object.__setattr__(self, "eps_grid", tuple(float(v) for v in self.eps_grid))
        if self.model not in _MODELS:
            raise ValueError(f"model must be one of {_MODELS}, got {self.model!r}")
        if not self.n_grid:
            raise ValueError("n_grid must be non-empty")
        if not self.eps_grid:
            raise ValueError("eps_grid must be non-empty")
        if any(n < 2 for n in self.n_grid):
            raise ValueError("n_grid entries must be >= 2")
        if self.model == "circle" and any(n < 3 for n in self.n_grid):
            raise ValueError("circle runs need n_grid entries >= 3")
        if any(e <= 0.0 for e in self.eps_grid):
            raise ValueError("eps_grid entries must be positive")
        if self.model == "circle" and any(e >= _MAX_ARC_EPS for e in self.eps_grid):
            raise ValueError("circle eps_grid entries must be below 2*pi/3")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.model == "box" and self.dim < 1:
            raise ValueError("box dim must be >= 1")
        if self.model != "circle" and not self.b > self.a:
            raise ValueError(f"domain needs a < b, got [{self.a}, {self.b}]")
        if self.step_cap is not None and self.step_cap < 1:
            raise ValueError("step_cap must be >= 1 when given")
        if self.observe_every < 0:
            raise ValueError("observe_every must be >= 0")


_CONFIG_FIELDS = (
    "model",
    "n_grid",
    "eps_grid",
    "dim",
    "a",
    "b",
    "trials",
    "master_seed",
    "step_cap",
    "observe_every",
)
_REQUIRED_FIELDS = ("model", "n_grid", "eps_grid")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a config from a parsed JSON document with field-level errors."""
    for key in _REQUIRED_FIELDS:
        if key not in doc:
            raise ValueError(f"config is missing required field {key!r}")
    unknown = sorted(set(doc) - set(_CONFIG_FIELDS))
    if unknown:
        raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
    return ExperimentConfig(**doc)


class AggregateStats(NamedTuple):
    """Sample count, mean, unbiased std, and stderr = std / sqrt(count).

    std and stderr are None below two samples; mean is None for an empty
    sample set.
    """

    count: int
    mean: Optional[float]
    std: Optional[float]
    stderr: Optional[float]


@dataclass(frozen=True)
class TrialRow:
    model: str
    n: int
    dim: Optional[int]
    eps: float
    trial: int
    seed: int
    t_eps: Optional[int]
    t_eps_prime: Optional[int]
    t_hd: Optional[int]
    cap_hit: bool
    final_range: Optional[float]
    final_lyapunov: Optional[float]
    final_mean: Optional[float]
    trace: Optional[tuple] = None


@dataclass(frozen=True)
class CellAggregate:
    model: str
    n: int
    dim: Optional[int]
    eps: float
    trials_used: int
    cap_exhausted: int
    t_hat: AggregateStats
    thd_hat: Optional[AggregateStats]
    bound_exact: float
    bound_simplified: float


@dataclass
class ResultTable:
    config: ExperimentConfig
    rows: list
    cells: list


# ------------------------------------------------------------------- seeding


def seed_for_trial(
    master_seed: int, model_id, n: int, eps_index: int, trial_index: int
) -> int:
    """64-bit seed for one trial, an avalanche mix of all grid coordinates.

    ``model_id`` is a model name (or already an integer id).  Pure function:
    identical inputs give identical seeds on every platform.
    """
    if isinstance(model_id, str):
        if model_id not in _MODEL_IDS:
            raise ValueError(f"unknown model {model_id!r}")
        mid = _MODEL_IDS[model_id]
    else:
        mid = int(model_id)
    return mix_seed(int(master_seed), mid, int(n), int(eps_index), int(trial_index))


# --------------------------------------------------------------- aggregation


def aggregate(samples: Sequence[float]) -> AggregateStats:
    """Mean, unbiased standard deviation, and standard error of the mean.

    fsum keeps the reduction independent of sample ordering.
    """
    vals = [float(v) for v in samples]
    count = len(vals)
    if count == 0:
        return AggregateStats(0, None, None, None)
    mean = math.fsum(vals) / count
    if count < 2:
        return AggregateStats(count, mean, None, None)
    var = math.fsum((v - mean) ** 2 for v in vals) / (count - 1)
    std = math.sqrt(var)
    return AggregateStats(count, mean, std, std / math.sqrt(count))


# ------------------------------------------------------------------- running


def _cell_bounds(model, n, dim, eps, a, b):
    if model == "scalar":
        tb = t_eps_bound_uniform_init(n, eps, a, b)
        return tb.exact, tb.simplified
    if model == "box":
        tb = t_eps_bound_vector(n, dim, eps, a=a, b=b, uniform_init=True)
        return tb.exact, tb.simplified
    v = t_eps_bound_circle(n, eps)
    return v, v


def _trace_value(model, frame):
    if model == "circle":
        return TWO_PI - frame.gamma_max
    return frame.lyapunov


def _trial_task(args):
    (model, n, dim, eps, eps_index, trial_index, a, b, master_seed, cap, every) = args
    seed = seed_for_trial(master_seed, model, n, eps_index, trial_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    if model == "scalar":
        domain = IntervalDomain(a, b)
    elif model == "box":
        domain = BoxDomain(a, b, dim)
    else:
        domain = CircleDomain()
    x0 = init_uniform(rng, domain, n)
    if model == "circle":
        events = (CircleArc(eps), HalfDisk())
    else:
        events = (RangeThreshold(eps), LyapunovThreshold(n * eps * eps))
    trace = [] if every else None
    observers = ()
    if every:
        observers = (
            lambda frame: trace.append((frame.step, float(_trace_value(model, frame)))),
        )
    rec = run_trajectory(
        rng,
        x0,
        model,
        events + (MaxSteps(cap),),
        observers=observers,
        observe_every=every,
    )
    x = rec.final_state
    if model == "scalar":
        row = TrialRow(
            model, n, None, eps, trial_index, seed,
            rec.hits[events[0]], rec.hits[events[1]], None, rec.cap_hit,
            float(range_scalar(x)), float(lyapunov_scalar(x)),
            float(mean_state(x)),
            tuple(trace) if trace is not None else None,
        )
    elif model == "box":
        row = TrialRow(
            model, n, dim, eps, trial_index, seed,
            rec.hits[events[0]], rec.hits[events[1]], None, rec.cap_hit,
            float(range_vector(x)), float(lyapunov_per_dimension(x)[1]),
            None,
            tuple(trace) if trace is not None else None,
        )
    else:
        _, gmax = circular_gaps(x)
        row = TrialRow(
            model, n, None, eps, trial_index, seed,
            rec.hits[events[0]], None, rec.hits[events[1]], rec.cap_hit,
            float(TWO_PI - gmax), None, None,
            tuple(trace) if trace is not None else None,
        )
    return row


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Run every cell of the grid; deterministic for any worker count.

    Tasks are dispatched per trial; results are collected back into
    (cell, trial) order before aggregation, so the output is identical
    whether run serially or on a process pool.
    """
    tasks = []
    meta = []
    dim = config.dim if config.model == "box" else None
    for n in config.n_grid:
        for eps_index, eps in enumerate(config.eps_grid):
            be, bs = _cell_bounds(config.model, n, dim, eps, config.a, config.b)
            cap = (
                config.step_cap
                if config.step_cap is not None
                else default_step_cap(bs)
            )
            meta.append((n, eps, be, bs))
            for trial_index in range(config.trials):
                tasks.append(
                    (
                        config.model, n, dim, eps, eps_index, trial_index,
                        config.a, config.b, config.master_seed, cap,
                        config.observe_every,
                    )
                )
    if workers <= 1:
        rows = [_trial_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_trial_task, tasks, chunksize=chunk))

    cells = []
    at = 0
    for n, eps, be, bs in meta:
        cell_rows = rows[at : at + config.trials]
        at += config.trials
        t_hat = aggregate([r.t_eps for r in cell_rows if r.t_eps is not None])
        thd_hat = None
        if config.model == "circle":
            thd_hat = aggregate([r.t_hd for r in cell_rows if r.t_hd is not None])
        cells.append(
            CellAggregate(
                model=config.model,
                n=n,
                dim=dim,
                eps=eps,
                trials_used=t_hat.count,
                cap_exhausted=sum(1 for r in cell_rows if r.cap_hit),
                t_hat=t_hat,
                thd_hat=thd_hat,
                bound_exact=be,
                bound_simplified=bs,
            )
        )
    return ResultTable(config=config, rows=rows, cells=cells)


def assert_no_cap_exhaustion(table: ResultTable) -> None:
    """Fail loudly when any cell lost trials to the step cap."""
    bad = [c for c in table.cells if c.cap_exhausted]
    if bad:
        worst = max(bad, key=lambda c: c.cap_exhausted)
        raise RuntimeError(
            f"{len(bad)} cell(s) hit the step cap; worst: model={worst.model} "
            f"N={worst.n} eps={worst.eps} lost {worst.cap_exhausted} trial(s)"
        )


# --------------------------------------------------------------- persistence


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _trial_fields(r: TrialRow):
    return (
        r.model, r.n, r.dim, r.eps, r.trial, r.seed, r.t_eps, r.t_eps_prime,
        r.t_hd, r.cap_hit, r.final_range, r.final_lyapunov, r.final_mean,
    )


def _cell_fields(c: CellAggregate):
    thd = c.thd_hat or AggregateStats(0, None, None, None)
    return (
        c.model, c.n, c.dim, c.eps, c.trials_used, c.t_hat.mean, c.t_hat.std,
        c.t_hat.stderr, thd.mean, thd.std, c.bound_exact, c.bound_simplified,
    )


def _comment_line(config: ExperimentConfig) -> str:
    return f"# pclab {__version__} seed={config.master_seed}"


def _render_trials_csv(table: ResultTable) -> str:
    lines = [_comment_line(table.config), TRIAL_HEADER]
    for r in table.rows:
        lines.append(",".join(_fmt(v) for v in _trial_fields(r)))
    return "\n".join(lines) + "\n"


def _render_aggregate_csv(table: ResultTable) -> str:
    lines = [_comment_line(table.config), AGGREGATE_HEADER]
    for c in table.cells:
        lines.append(",".join(_fmt(v) for v in _cell_fields(c)))
    return "\n".join(lines) + "\n"


def _stats_doc(s: Optional[AggregateStats]):
    if s is None:
        return None
    return {"count": s.count, "mean": s.mean, "std": s.std, "stderr": s.stderr}


def _render_json(table: ResultTable) -> str:
    cfg = table.config
    doc = {
        "_header": {
            "tool": "pclab",
            "version": __version__,
            "seed": cfg.master_seed,
        },
        "config": {
            "model": cfg.model,
            "n_grid": list(cfg.n_grid),
            "eps_grid": list(cfg.eps_grid),
            "dim": cfg.dim,
            "a": cfg.a,
            "b": cfg.b,
            "trials": cfg.trials,
            "master_seed": cfg.master_seed,
            "step_cap": cfg.step_cap,
            "observe_every": cfg.observe_every,
        },
        "trials": [
            {
                "model": r.model,
                "n": r.n,
                "dim": r.dim,
                "eps": r.eps,
                "trial": r.trial,
                "seed": r.seed,
                "t_eps": r.t_eps,
                "t_eps_prime": r.t_eps_prime,
                "t_hd": r.t_hd,
                "cap_hit": r.cap_hit,
                "final_range": r.final_range,
                "final_lyapunov": r.final_lyapunov,
                "final_mean": r.final_mean,
                **({"trace": [list(p) for p in r.trace]} if r.trace else {}),
            }
            for r in table.rows
        ],
        "aggregates": [
            {
                "model": c.model,
                "n": c.n,
                "dim": c.dim,
                "eps": c.eps,
                "trials": c.trials_used,
                "cap_exhausted": c.cap_exhausted,
                "t_hat": _stats_doc(c.t_hat),
                "thd_hat": _stats_doc(c.thd_hat),
                "bound_exact": c.bound_exact,
                "bound_simplified": c.bound_simplified,
            }
            for c in table.cells
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pclab-", suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OSError(f"cannot write {path}: {exc}") from exc


def persist(table: ResultTable, path, format: str = "csv") -> None:
    """Write the per-trial table atomically (temp file, then rename)."""
    if format == "csv":
        text = _render_trials_csv(table)
    elif format == "json":
        text = _render_json(table)
    else:
        raise ValueError(f"unknown format {format!r} (expected 'csv' or 'json')")
    _atomic_write(path, text)


def persist_aggregate(table: ResultTable, path) -> None:
    """Write the per-cell aggregate CSV atomically."""
    _atomic_write(path, _render_aggregate_csv(table))


def _parse_opt(text: str, kind):
    return None if text == "" else kind(text)


def load_trials_csv(path) -> list:
    """Read back a per-trial CSV into TrialRow objects (traces excluded)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != TRIAL_HEADER:
        raise ValueError(f"{path}: not a pclab trial table (header mismatch)")
    rows = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != 13:
            raise ValueError(f"{path}: malformed row {ln!r}")
        rows.append(
            TrialRow(
                model=parts[0],
                n=int(parts[1]),
                dim=_parse_opt(parts[2], int),
                eps=float(parts[3]),
                trial=int(parts[4]),
                seed=int(parts[5]),
                t_eps=_parse_opt(parts[6], int),
                t_eps_prime=_parse_opt(parts[7], int),
                t_hd=_parse_opt(parts[8], int),
                cap_hit=parts[9] == "1",
                final_range=_parse_opt(parts[10], float),
                final_lyapunov=_parse_opt(parts[11], float),
                final_mean=_parse_opt(parts[12], float),
            )
        )
    return rows


_AGG_COLUMNS = AGGREGATE_HEADER.split(",")
_AGG_INT = {"N", "D", "trials"}
_AGG_STR = {"model"}


def load_aggregate_csv(path) -> list:
    """Read back an aggregate CSV as dicts keyed by the schema columns."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != AGGREGATE_HEADER:
        raise ValueError(f"{path}: not a pclab aggregate table (header mismatch)")
    out = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(_AGG_COLUMNS):
            raise ValueError(f"{path}: malformed row {ln!r}")
        rec = {}
        for key, text in zip(_AGG_COLUMNS, parts):
            if key in _AGG_STR:
                rec[key] = text
            elif key in _AGG_INT:
                rec[key] = _parse_opt(text, int)
            else:
                rec[key] = _parse_opt(text, float)
        out.append(rec)
    return out


# ------------------------------------------------------------------- presets


def reproduce_paper_configs(master_seed: int, scale=1.0) -> list:
    """The published grid protocol as ready-to-run configs.

    ``scale`` is a trial-count multiplier in (0, 1], or the string "desk"
    for a workstation-sized pass (fewer trials and the large-N tail of the
    grids dropped).
    """
    if scale == "desk":
        trials = _DESK_TRIALS
        line_n, box_n, dims = _DESK_N_LINE, _DESK_N_BOX, _DESK_DIMS_BOX
    elif isinstance(scale, str):
        raise ValueError(f"unknown scale preset {scale!r}")
    else:
        if not 0.0 < scale <= 1.0:
            raise ValueError("scale must lie in (0, 1]")
        trials = max(4, round(PAPER_TRIALS * scale))
        line_n, box_n, dims = PAPER_N_LINE, PAPER_N_BOX, PAPER_DIMS_BOX
    configs = [
        ExperimentConfig(
            model="scalar",
            n_grid=line_n,
            eps_grid=PAPER_EPS_LINE,
            trials=trials,
            master_seed=master_seed,
        )
    ]
    for dim in dims:
        configs.append(
            ExperimentConfig(
                model="box",
                n_grid=box_n,
                eps_grid=PAPER_EPS_BOX,
                dim=dim,
                trials=trials,
                master_seed=master_seed,
            )
        )
    configs.append(
        ExperimentConfig(
            model="circle",
            n_grid=line_n,
            eps_grid=PAPER_EPS_LINE,
            trials=trials,
            master_seed=master_seed,
        )
    )
    return configs
