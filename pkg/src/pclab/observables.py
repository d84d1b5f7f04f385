"""Derived quantities of a configuration: spread measures, circle
diagnostics, and the closed-form one-step drift of the circle resultant.

Everything here is a pure function of the configuration passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .dynamics import TWO_PI, geodesic_arc

# below this resultant norm the mean direction (and with it the oriented
# angle beta) is numerically meaningless; identity checks that need it
# are skipped and flagged
_DEGENERATE_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class ObservableFrame:
    """Snapshot of derived quantities at one step of a trajectory.

    `state` references the live configuration the frame was built from;
    copy it if you keep frames around while a trajectory advances.
    Fields that do not apply to the model are None.
    """

    step: int
    model: str
    state: np.ndarray
    lyapunov: Optional[float] = None
    lyapunov_dims: Optional[tuple] = None
    value_range: Optional[float] = None
    mean: object = None
    vector_sum: Optional[np.ndarray] = None
    resultant_norm: Optional[float] = None
    gamma_max: Optional[float] = None
    half_disk: Optional[float] = None


class PairGeometry(NamedTuple):
    """Geodesic geometry of one pair of angles.

    alpha is half the geodesic angle (in [0, pi/2]); bisector is the unit
    vector at the arc midpoint; beta is the oriented angle from the
    resultant direction to the bisector, or None when the resultant is
    degenerate.
    """

    alpha: float
    beta: Optional[float]
    bisector: np.ndarray


class IdentityResiduals(NamedTuple):
    norm_residual: Optional[float]
    cos_pair_residual: Optional[float]
    cos_double_residual: float
    degenerate: bool


# ----------------------------------------------------------- spread measures


def lyapunov_scalar(x: np.ndarray) -> float:
    """Sum of (x_i - x_j)^2 over ordered pairs i != j.

    Each unordered pair counts twice; equals 2N * sum (x_i - mean)^2.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x - x.mean()
    return max(0.0, 2.0 * len(x) * float(d @ d))


def lyapunov_per_dimension(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-coordinate ordered-pair square sums and their total.

    The total equals the ordered-pair sum of squared Euclidean distances.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    d = x - x.mean(axis=0)
    dims = np.maximum(0.0, 2.0 * n * (d * d).sum(axis=0))
    return dims, float(dims.sum())


def range_scalar(x: np.ndarray) -> float:
    """Largest pairwise absolute difference (max - min)."""
    x = np.asarray(x)
    return float(x.max() - x.min())


def range_vector(x: np.ndarray) -> float:
    """Largest pairwise Euclidean distance between rows."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return math.sqrt(float(sq.max()))


def mean_state(x: np.ndarray):
    """Arithmetic mean, per coordinate for configurations in a box."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(x.mean())
    return x.mean(axis=0)


# ------------------------------------------------------------------- circle


def circular_gaps(theta: np.ndarray) -> tuple[np.ndarray, float]:
    """Gaps between consecutive sorted angles, wrap-around included.

    Returns (gaps, largest gap); the gaps sum to 2*pi up to rounding.
    Duplicate angles yield zero gaps (agents are counted, not distinct
    opinions).
    """
    srt = np.sort(np.asarray(theta, dtype=np.float64))
    gaps = np.empty(len(srt))
    gaps[:-1] = srt[1:] - srt[:-1]
    gaps[-1] = srt[0] + TWO_PI - srt[-1]
    return gaps, float(gaps.max())


def half_disk_witness(theta: np.ndarray) -> Optional[float]:
    """Angle theta_HD with cos(theta_i - theta_HD) > 0 for all i, if any.

    Exists iff the largest empty gap strictly exceeds pi; the witness is
    the antipode of the empty arc's midpoint. The construction is
    re-verified before returning; None means no (verified) witness.
    """
    theta = np.asarray(theta, dtype=np.float64)
    srt = np.sort(theta)
    gaps = np.empty(len(srt))
    gaps[:-1] = srt[1:] - srt[:-1]
    gaps[-1] = srt[0] + TWO_PI - srt[-1]
    k = int(np.argmax(gaps))
    gmax = float(gaps[k])
    if gmax <= math.pi:
        return None
    witness = (srt[k] + gmax / 2.0 + math.pi) % TWO_PI
    if np.all(np.cos(theta - witness) > 0.0):
        return float(witness)
    return None


def circle_pairwise_diameter(theta: np.ndarray) -> float:
    """Largest pairwise circular distance min(|d|, 2*pi - |d|).

    When the largest empty gap exceeds pi all angles sit inside one arc
    and the diameter is 2*pi minus that gap; otherwise it is found by
    direct pairwise comparison.
    """
    theta = np.asarray(theta, dtype=np.float64)
    _, gmax = circular_gaps(theta)
    if gmax > math.pi:
        return TWO_PI - gmax
    d = np.abs(theta[:, None] - theta[None, :])
    return float(np.minimum(d, TWO_PI - d).max())


def vector_sum(theta: np.ndarray) -> tuple[np.ndarray, float]:
    """Resultant of the unit vectors at the given angles, with its norm."""
    theta = np.asarray(theta, dtype=np.float64)
    s = np.array([float(np.cos(theta).sum()), float(np.sin(theta).sum())])
    return s, float(math.hypot(s[0], s[1]))


def sinc(a: float) -> float:
    """sin(a)/a with the removable singularity filled in.

    Short series below 1e-4 avoids the 0/0 and keeps full precision.
    """
    a = float(a)
    if abs(a) < 1e-4:
        a2 = a * a
        return 1.0 - a2 / 6.0 + a2 * a2 / 120.0
    return math.sin(a) / a


def pair_geometry(theta_i: float, theta_j: float, resultant: np.ndarray) -> PairGeometry:
    """Half-angle, bisector, and resultant-relative orientation of a pair."""
    arc = geodesic_arc(theta_i, theta_j)
    if arc is None:
        alpha = 0.0
        bis_angle = float(theta_i) % TWO_PI
    else:
        alpha = arc.length / 2.0
        bis_angle = (arc.start + alpha) % TWO_PI
    bis = np.array([math.cos(bis_angle), math.sin(bis_angle)])
    norm = math.hypot(float(resultant[0]), float(resultant[1]))
    if norm <= _DEGENERATE_NORM * 2:
        beta = None
    else:
        theta_s = math.atan2(float(resultant[1]), float(resultant[0]))
        beta = (bis_angle - theta_s + math.pi) % TWO_PI - math.pi
    return PairGeometry(alpha=alpha, beta=beta, bisector=bis)


def circle_identity_residuals(theta: np.ndarray) -> IdentityResiduals:
    """Absolute residuals of three exact resultant identities.

    1. |S| = sum_i cos(theta_i - angle(S))
    2. sum_{i<j} cos(alpha) cos(beta) = (N-1)/2 * |S|
    3. sum_{i<j} cos(2 alpha)         = (|S|^2 - N)/2

    The left sides are evaluated per pair through the geodesic geometry
    (an independent route from the resultant algebra on the right).
    When the resultant is degenerate the direction-dependent residuals
    (1 and 2) are None and the flag is set.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = len(theta)
    s, norm = vector_sum(theta)
    degenerate = norm <= _DEGENERATE_NORM * n

    sum_cos_double = 0.0
    sum_cos_pair = 0.0
    if degenerate:
        for i in range(n):
            for j in range(i + 1, n):
                g = pair_geometry(theta[i], theta[j], s)
                sum_cos_double += math.cos(2.0 * g.alpha)
        return IdentityResiduals(
            norm_residual=None,
            cos_pair_residual=None,
            cos_double_residual=abs(sum_cos_double - (norm * norm - n) / 2.0),
            degenerate=True,
        )

    theta_s = math.atan2(s[1], s[0])
    for i in range(n):
        for j in range(i + 1, n):
            g = pair_geometry(theta[i], theta[j], s)
            sum_cos_double += math.cos(2.0 * g.alpha)
            sum_cos_pair += math.cos(g.alpha) * math.cos(g.beta)
    norm_lhs = float(np.cos(theta - theta_s).sum())
    return IdentityResiduals(
        norm_residual=abs(norm_lhs - norm),
        cos_pair_residual=abs(sum_cos_pair - (n - 1) / 2.0 * norm),
        cos_double_residual=abs(sum_cos_double - (norm * norm - n) / 2.0),
        degenerate=False,
    )


def one_step_drift_closed_form(theta: np.ndarray) -> tuple[float, float]:
    """Exact one-step drift of the resultant for the circle model.

    Returns (<E[S' - S], S>, E|S'|^2) where S' is the resultant after
    one interaction from the given configuration.  The orientation-
    dependent terms are evaluated through the projection <bisector, S>,
    which stays well defined when the resultant direction degenerates;
    coincident pairs contribute through the sinc -> 1 limit.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = len(theta)
    s, norm = vector_sum(theta)
    sx, sy = float(s[0]), float(s[1])
    norm_sq = norm * norm

    sum_drift = 0.0
    sum_next = 0.0
    for i in range(n):
        ti = theta[i]
        for j in range(i + 1, n):
            arc = geodesic_arc(ti, theta[j])
            if arc is None:
                alpha = 0.0
                snc = 1.0
                cos_a = 1.0
                bis_angle = float(ti)
            else:
                alpha = arc.length / 2.0
                snc = sinc(alpha)
                cos_a = math.cos(alpha)
                bis_angle = arc.start + alpha
            proj = math.cos(bis_angle) * sx + math.sin(bis_angle) * sy
            sum_drift += snc * proj
            sum_next += snc * snc + 2.0 * snc * proj - 4.0 * snc * cos_a

    pair_weight = 4.0 / (n * (n - 1))
    drift = -(2.0 / n) * norm_sq + pair_weight * sum_drift
    next_sq = (
        norm_sq
        + 4.0 * (1.0 - 1.0 / (2.0 * (n - 1))) * (1.0 - norm_sq / n)
        + pair_weight * sum_next
    )
    return drift, next_sq


# ------------------------------------------------------------------- frames


def make_frame(model: str, state: np.ndarray, step: int) -> ObservableFrame:
    """Build an exact observable snapshot for the given model."""
    if model == "scalar":
        return ObservableFrame(
            step=step,
            model=model,
            state=state,
            lyapunov=lyapunov_scalar(state),
            value_range=range_scalar(state),
            mean=mean_state(state),
        )
    if model == "box":
        dims, total = lyapunov_per_dimension(state)
        return ObservableFrame(
            step=step,
            model=model,
            state=state,
            lyapunov=total,
            lyapunov_dims=tuple(float(v) for v in dims),
            value_range=range_vector(state),
            mean=mean_state(state),
        )
    if model == "circle":
        s, norm = vector_sum(state)
        _, gmax = circular_gaps(state)
        return ObservableFrame(
            step=step,
            model=model,
            state=state,
            value_range=circle_pairwise_diameter(state),
            vector_sum=s,
            resultant_norm=norm,
            gamma_max=gmax,
            half_disk=half_disk_witness(state),
        )
    raise ValueError(f"unknown model {model!r}")
