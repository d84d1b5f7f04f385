"""Least-squares fits of measured stopping times and bound comparisons.

Three regression shapes cover the empirical laws we track:

* ``T_vs_lneps``   -- per-N stopping time against -3 ln(eps), slope g and
  intercept e; the normalized slope c = g/N tends to 1 from below as N
  grows.
* ``eN_vs_NlnN``   -- the intercepts e_N against (N ln N, N, 1).
* ``THD_vs_NlnN``  -- half-disk absorption times against (N ln N, 1).

All fits are plain unweighted OLS.  Input pairs are sorted before the
design matrix is assembled, so every fit is an exact function of the data
*set* — reordering the input cannot change a single bit of the output.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "BoundComparison",
    "EpsDependence",
    "NlnNOffset",
    "RegressionFit",
    "ThdFit",
    "compare_bounds",
    "eps_series_by_n",
    "fit_eps_dependence",
    "fit_nlnn_offset",
    "fit_report",
    "fit_thd",
    "sign_runs",
    "thd_series",
]


@dataclass(frozen=True)
class RegressionFit:
    """One OLS fit: coefficients, fit quality, and a data fingerprint."""

    model_id: str
    coefficients: tuple
    residual_stderr: float
    r_squared: float
    n_points: int
    fingerprint: str
    residuals: tuple


class EpsDependence(NamedTuple):
    g: float
    e: float
    c: float
    fit: RegressionFit


class NlnNOffset(NamedTuple):
    a: float
    b: float
    f: float
    fit: RegressionFit


class ThdFit(NamedTuple):
    a: float
    f: float
    residual_sign_runs: int
    fit: RegressionFit


class BoundComparison(NamedTuple):
    model: str
    n: int
    dim: Optional[int]
    eps: float
    t_hat: float
    bound: float
    slack: float
    ratio: float
    exceeded: bool


def _canonical_pairs(series) -> list:
    pairs = [(float(x), float(y)) for x, y in series]
    pairs.sort()
    return pairs


def _fingerprint(pairs) -> str:
    blob = ";".join(f"{x!r},{y!r}" for x, y in pairs)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _ols(model_id: str, pairs, columns) -> RegressionFit:
    """OLS of y on the given column functions of x; errors on rank loss."""
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    design = np.column_stack([col(x) for col in columns])
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < len(columns):
        raise ValueError(f"{model_id}: rank-deficient design matrix")
    resid = y - design @ beta
    rss = math.fsum(float(r) * float(r) for r in resid)
    ybar = math.fsum(map(float, y)) / len(y)
    tss = math.fsum((float(v) - ybar) ** 2 for v in y)
    dof = len(y) - len(columns)
    stderr = math.sqrt(rss / dof) if dof > 0 else 0.0
    if tss > 0.0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 1.0 if rss == 0.0 else 0.0
    return RegressionFit(
        model_id=model_id,
        coefficients=tuple(float(b) for b in beta),
        residual_stderr=stderr,
        r_squared=r2,
        n_points=len(pairs),
        fingerprint=_fingerprint(pairs),
        residuals=tuple(float(r) for r in resid),
    )


def _require_distinct(pairs, minimum: int, what: str) -> None:
    if len({x for x, _ in pairs}) < minimum:
        raise ValueError(f"need at least {minimum} distinct {what} values")


def fit_eps_dependence(n: int, series) -> EpsDependence:
    """Fit measured stopping times at fixed N to g*(-3 ln eps) + e.

    ``series`` holds (eps, t_hat) pairs; at least three distinct eps are
    required.  The normalized slope c = g/N is reported alongside.
    """
    pairs = _canonical_pairs(series)
    _require_distinct(pairs, 3, "eps")
    fit = _ols(
        "T_vs_lneps",
        pairs,
        (lambda x: -3.0 * np.log(x), lambda x: np.ones_like(x)),
    )
    g, e = fit.coefficients
    return EpsDependence(g=g, e=e, c=g / n, fit=fit)


def fit_nlnn_offset(series) -> NlnNOffset:
    """Fit intercepts e_N to a*N ln N + b*N + f (>= 4 distinct N)."""
    pairs = _canonical_pairs(series)
    _require_distinct(pairs, 4, "N")
    fit = _ols(
        "eN_vs_NlnN",
        pairs,
        (lambda x: x * np.log(x), lambda x: x, lambda x: np.ones_like(x)),
    )
    a, b, f = fit.coefficients
    return NlnNOffset(a=a, b=b, f=f, fit=fit)


def fit_thd(series) -> ThdFit:
    """Fit half-disk absorption times to a*N ln N + f (>= 3 distinct N).

    ``residual_sign_runs`` counts sign runs of the residuals in N order: 0
    means a numerically perfect fit, 1-2 means a one-sided or single-break
    pattern (evidence against the linear-in-N-ln-N shape), more means the
    scatter crosses the fit line repeatedly, as a good fit should.
    """
    pairs = _canonical_pairs(series)
    _require_distinct(pairs, 3, "N")
    fit = _ols(
        "THD_vs_NlnN",
        pairs,
        (lambda x: x * np.log(x), lambda x: np.ones_like(x)),
    )
    a, f = fit.coefficients
    scale = max(abs(y) for _, y in pairs)
    runs = sign_runs(fit.residuals, tol=1e-9 * max(1.0, scale))
    return ThdFit(a=a, f=f, residual_sign_runs=runs, fit=fit)


def sign_runs(values: Sequence[float], tol: float) -> int:
    """Number of maximal same-sign blocks, ignoring entries within tol of 0."""
    signs = [1 if v > tol else -1 for v in values if abs(v) > tol]
    if not signs:
        return 0
    return 1 + sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def fit_report(result) -> dict:
    """JSON-ready record for a fit (accepts a fit or a result carrying one)."""
    fit = getattr(result, "fit", result)
    return {
        "model": fit.model_id,
        "coefficients": list(fit.coefficients),
        "r_squared": fit.r_squared,
        "residual_stderr": fit.residual_stderr,
        "n_points": fit.n_points,
        "grid_fingerprint": fit.fingerprint,
    }


# ----------------------------------------------------------------- adapters


def _cell_view(cell):
    """Uniform (model, n, dim, eps, t_mean, thd_mean, be, bs) view.

    Accepts CellAggregate objects or dict records read back from an
    aggregate CSV.
    """
    if isinstance(cell, dict):
        return (
            cell["model"],
            cell["N"],
            cell.get("D"),
            cell["epsilon"],
            cell.get("t_hat_mean"),
            cell.get("thd_hat_mean"),
            cell.get("bound_exact"),
            cell.get("bound_simplified"),
        )
    thd = cell.thd_hat.mean if cell.thd_hat is not None else None
    return (
        cell.model,
        cell.n,
        cell.dim,
        cell.eps,
        cell.t_hat.mean,
        thd,
        cell.bound_exact,
        cell.bound_simplified,
    )


def compare_bounds(cells, use: str = "simplified") -> list:
    """Per-cell empirical-vs-bound rows; flags cells above their bound.

    ``use`` picks the bound column.  Cells with no usable trials or a
    missing/NaN bound are an error: silently skipping them would bias the
    comparison exactly where it is most interesting.  An infinite bound is
    fine — it is trivially satisfied (the circle bound overflows floats
    already at moderate N) and shows up as infinite slack and ratio.
    """
    if use not in ("exact", "simplified"):
        raise ValueError(f"use must be 'exact' or 'simplified', got {use!r}")
    out = []
    for cell in cells:
        model, n, dim, eps, t_mean, _, be, bs = _cell_view(cell)
        bound = bs if use == "simplified" else be
        label = f"model={model} N={n} eps={eps}"
        if t_mean is None:
            raise ValueError(f"cell {label} has no usable trials")
        if bound is None or math.isnan(bound):
            raise ValueError(f"cell {label} has no usable bound")
        ratio = bound / t_mean if t_mean > 0 else math.inf
        out.append(
            BoundComparison(
                model=model,
                n=n,
                dim=dim,
                eps=eps,
                t_hat=t_mean,
                bound=bound,
                slack=bound - t_mean,
                ratio=ratio,
                exceeded=t_mean > bound,
            )
        )
    return out


def eps_series_by_n(cells) -> dict:
    """Group cells into {N: [(eps, t_hat_mean), ...]} sorted by eps."""
    by_n = {}
    for cell in cells:
        _, n, _, eps, t_mean, _, _, _ = _cell_view(cell)
        by_n.setdefault(n, []).append((eps, t_mean))
    for n in by_n:
        by_n[n].sort()
    return by_n


def thd_series(cells) -> list:
    """Pool circle absorption means over the eps grid: [(N, mean), ...].

    The half-disk rule has no eps, so cells sharing N are independent
    measurements of the same quantity; with equal trial counts the plain
    mean of cell means is the pooled estimate.
    """
    by_n = {}
    for cell in cells:
        _, n, _, _, _, thd_mean, _, _ = _cell_view(cell)
        if thd_mean is not None:
            by_n.setdefault(n, []).append(thd_mean)
    return [(n, math.fsum(v) / len(v)) for n, v in sorted(by_n.items())]
