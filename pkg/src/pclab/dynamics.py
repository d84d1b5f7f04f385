"""Stochastic pairwise update rules and the seeded trajectory runner.

Three models share the same clock: at every step one unordered pair of
agents is selected uniformly at random and both members resample their
state inside the region spanned by the pair.

scalar  N opinions in an interval; both agents redraw independently and
        uniformly in [min(x_i, x_j), max(x_i, x_j)].
box     N points in R^D; both agents redraw at independent uniform
        positions on the segment between the two rows.
circle  N angles in [0, 2*pi); both agents redraw uniformly on the
        geodesic arc between their angles (an exact half-circle tie is
        resolved deterministically to the increasing-angle branch).

A step is counted even when the chosen pair coincides in value and the
state cannot change: the clock counts interactions, not state changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

_MASK64 = (1 << 64) - 1


class InvalidAgentCount(ValueError):
    """Raised when an operation needs at least two agents."""


# --------------------------------------------------------------------- seeding


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(*fields: int) -> int:
    """Fold integer fields into one 64-bit seed (splitmix-style avalanche).

    Pure function of its arguments; used so that every (master seed,
    trial) combination gets its own independent stream.
    """
    h = 0
    for f in fields:
        h = _splitmix64(h ^ (int(f) & _MASK64))
    return h


def rng_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    """Deterministic per-trial random stream.

    Identical (master_seed, trial_index) give identical draw sequences,
    independent of any other stream in the process.
    """
    return np.random.Generator(np.random.PCG64(mix_seed(master_seed, trial_index)))


# --------------------------------------------------------------------- domains


@dataclass(frozen=True)
class IntervalDomain:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"interval needs a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class BoxDomain:
    a: float
    b: float
    dim: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"box needs a < b, got [{self.a}, {self.b}]")
        if self.dim < 1:
            raise ValueError(f"box dimension must be >= 1, got {self.dim}")


@dataclass(frozen=True)
class CircleDomain:
    """The unit circle, parametrized by angles in [0, 2*pi)."""


class GeodesicArc(NamedTuple):
    """Counter-clockwise arc from `start`, of length in (0, pi]."""

    start: float
    length: float


# ------------------------------------------------------------- pair selection


def _row_base(i: int, n: int) -> int:
    # number of pairs (a, b), a < b, with a < i
    return i * (2 * n - i - 1) // 2


def select_pair(rng, n: int) -> tuple[int, int]:
    """Uniformly select an unordered pair out of n*(n-1)/2, returned i < j.

    The pair is drawn by index (exact uniformity), not by rejection.
    """
    if n < 2:
        raise InvalidAgentCount(f"need at least 2 agents, got {n}")
    t = int(rng.integers(n * (n - 1) // 2))
    i = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * t)) / 2)
    if i < 0:
        i = 0
    while i > 0 and _row_base(i, n) > t:
        i -= 1
    while _row_base(i + 1, n) <= t:
        i += 1
    j = t - _row_base(i, n) + i + 1
    return i, j


# ------------------------------------------------------------- step functions


def step_scalar(rng, x: np.ndarray) -> np.ndarray:
    """Advance a scalar configuration by one pairwise interaction, in place."""
    i, j = select_pair(rng, len(x))
    xi = x[i]
    xj = x[j]
    if xi == xj:
        return x
    if xi < xj:
        lo, w = xi, xj - xi
    else:
        lo, w = xj, xi - xj
    x[i] = lo + w * rng.random()
    x[j] = lo + w * rng.random()
    return x


def step_vector(rng, x: np.ndarray) -> np.ndarray:
    """Advance a box configuration (N x D array) by one interaction, in place.

    The two selected rows move to (1-l)*x_i + l*x_j with independent
    uniform l for each of them.
    """
    i, j = select_pair(rng, len(x))
    d = x[j] - x[i]
    if not d.any():
        return x
    xi = x[i].copy()
    l1 = rng.random()
    l2 = rng.random()
    x[i] = xi + l1 * d
    x[j] = xi + l2 * d
    return x


def geodesic_arc(theta1: float, theta2: float) -> Optional[GeodesicArc]:
    """Shortest arc between two angles; None when they coincide.

    When the angular difference is at most pi the arc runs from the
    smaller to the larger angle; otherwise it is the complement arc
    wrapping through zero.  An exact difference of pi keeps the first
    branch (deterministic choice on a measure-zero event).
    """
    d = abs(float(theta2) - float(theta1))
    if d == 0.0:
        return None
    if d <= math.pi:
        return GeodesicArc(float(min(theta1, theta2)), d)
    return GeodesicArc(float(max(theta1, theta2)), TWO_PI - d)


def step_circle(rng, theta: np.ndarray) -> np.ndarray:
    """Advance an angular configuration by one interaction, in place.

    Both selected angles are redrawn uniformly on the geodesic arc of
    the pre-step pair and reduced into [0, 2*pi).
    """
    i, j = select_pair(rng, len(theta))
    arc = geodesic_arc(theta[i], theta[j])
    if arc is None:
        return theta
    s, ln = arc
    theta[i] = (s + ln * rng.random()) % TWO_PI
    theta[j] = (s + ln * rng.random()) % TWO_PI
    return theta


# --------------------------------------------------------------- initializers


def init_uniform(rng, domain, n: int) -> np.ndarray:
    """Draw n iid uniform states on the given domain."""
    if n < 2:
        raise InvalidAgentCount(f"need at least 2 agents, got {n}")
    if isinstance(domain, IntervalDomain):
        return rng.uniform(domain.a, domain.b, n)
    if isinstance(domain, BoxDomain):
        return rng.uniform(domain.a, domain.b, (n, domain.dim))
    if isinstance(domain, CircleDomain):
        th = rng.random(n) * TWO_PI
        th[th >= TWO_PI] -= TWO_PI  # guard against rounding at the seam
        return th
    raise TypeError(f"unknown domain {domain!r}")


# ---------------------------------------------------------- running trackers
#
# The trajectory runner keeps O(1)-per-step running observables. Sums are
# maintained incrementally around an offset (the initial mean) to limit
# cancellation, refreshed from the full state periodically and re-verified
# exactly whenever a threshold is about to fire.

_REFRESH_EVERY = 4096


class _ScalarTracker:
    __slots__ = ("x", "n", "off", "s1", "s2", "lo", "hi", "_since")

    def __init__(self, x: np.ndarray):
        self.x = x
        self.n = len(x)
        self.off = float(x.mean())
        self._refresh()

    def _refresh(self):
        d = self.x - self.off
        self.s1 = float(d.sum())
        self.s2 = float(d @ d)
        self.lo = float(self.x.min())
        self.hi = float(self.x.max())
        self._since = 0

    def update2(self, oi, oj, ni, nj):
        off = self.off
        a = oi - off
        b = oj - off
        c = ni - off
        e = nj - off
        self.s1 += (c - a) + (e - b)
        self.s2 += (c * c - a * a) + (e * e - b * b)
        if oi == self.lo or oj == self.lo:
            self.lo = float(self.x.min())
        if oi == self.hi or oj == self.hi:
            self.hi = float(self.x.max())
        self._since += 1
        if self._since >= _REFRESH_EVERY:
            self._refresh()

    def lyapunov(self) -> float:
        return 2.0 * (self.n * self.s2 - self.s1 * self.s1)

    def range(self) -> float:
        return self.hi - self.lo

    def mean(self) -> float:
        return self.off + self.s1 / self.n

    def range_leq(self, eps: float) -> bool:
        return self.hi - self.lo <= eps

    def lyap_leq(self, tau: float) -> bool:
        if self.lyapunov() > tau:
            return False
        self._refresh()  # confirm on exact sums before declaring a hit
        return self.lyapunov() <= tau


class _BoxTracker:
    __slots__ = ("x", "n", "dim", "off", "s1", "s2", "_since", "_track_diam",
                 "diam", "_dp", "_dq")

    def __init__(self, x: np.ndarray, track_diameter: bool = False):
        self.x = x
        self.n, self.dim = x.shape
        self.off = x.mean(axis=0).tolist()
        self._track_diam = track_diameter
        self._refresh()

    def _refresh(self):
        d = self.x - np.asarray(self.off)
        self.s1 = d.sum(axis=0).tolist()
        self.s2 = (d * d).sum(axis=0).tolist()
        self._since = 0
        if self._track_diam:
            self._diam_rescan()

    def _diam_rescan(self):
        diff = self.x[:, None, :] - self.x[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        flat = int(np.argmax(sq))
        self._dp, self._dq = divmod(flat, self.n)
        self.diam = math.sqrt(float(sq[self._dp, self._dq]))

    def update_rows(self, i, j, oi, oj, ni, nj):
        off = self.off
        s1 = self.s1
        s2 = self.s2
        for d in range(self.dim):
            a = oi[d] - off[d]
            b = oj[d] - off[d]
            c = ni[d] - off[d]
            e = nj[d] - off[d]
            s1[d] += (c - a) + (e - b)
            s2[d] += (c * c - a * a) + (e * e - b * b)
        if self._track_diam and (i == self._dp or i == self._dq
                                 or j == self._dp or j == self._dq):
            self._diam_rescan()
        self._since += 1
        if self._since >= _REFRESH_EVERY:
            self._refresh()

    def lyapunov_dims(self) -> list[float]:
        n = self.n
        return [2.0 * (n * s2 - s1 * s1) for s1, s2 in zip(self.s1, self.s2)]

    def lyapunov(self) -> float:
        return sum(self.lyapunov_dims())

    def range(self) -> float:
        return self.diam

    def mean(self) -> np.ndarray:
        n = self.n
        return np.asarray([o + s / n for o, s in zip(self.off, self.s1)])

    def range_leq(self, eps: float) -> bool:
        return self.diam <= eps

    def lyap_dims_leq(self, tau: float) -> bool:
        if any(v > tau for v in self.lyapunov_dims()):
            return False
        self._refresh()
        return all(v <= tau for v in self.lyapunov_dims())

    def lyap_leq(self, tau: float) -> bool:
        if self.lyapunov() > tau:
            return False
        self._refresh()
        return self.lyapunov() <= tau


class _CircleTracker:
    __slots__ = ("th", "n", "gamma")

    def __init__(self, th: np.ndarray):
        self.th = th
        self.n = len(th)
        self.recompute()

    def recompute(self):
        srt = np.sort(self.th)
        wrap = srt[0] + TWO_PI - srt[-1]
        if self.n > 1:
            inner = (srt[1:] - srt[:-1]).max()
            self.gamma = float(max(inner, wrap))
        else:  # pragma: no cover - configurations always have n >= 2
            self.gamma = TWO_PI

    def gamma_max(self) -> float:
        return self.gamma

    def half_disk(self) -> bool:
        return self.gamma > math.pi

    def gamma_geq(self, g: float) -> bool:
        return self.gamma >= g


# ------------------------------------------------------------------ trajectory


@dataclass
class TrialRecord:
    """Outcome of one trajectory run.

    hits maps each event policy to its first-hit step index (None when
    the cap ran out first).  cap_hit is True exactly when the step cap
    was exhausted with at least one policy still unfired.
    """

    hits: dict
    cap_hit: bool
    steps: int
    final_state: np.ndarray


def run_trajectory(rng, state, model: str, policies: Sequence,
                   observers: Sequence[Callable] = (),
                   observe_every: int = 0) -> TrialRecord:
    """Advance `state` in place until every policy fired or the cap is hit.

    Policies are first evaluated on the initial state (step index 0).
    A MaxSteps policy must be present; the smallest cap wins. Observers
    are called with an exact observable frame at step 0, every
    `observe_every` steps, and at termination (when observe_every > 0).
    """
    if model not in ("scalar", "box", "circle"):
        raise ValueError(f"unknown model {model!r}")
    state = np.asarray(state, dtype=np.float64)
    if model == "box":
        if state.ndim != 2:
            raise ValueError("box model expects an N x D array")
    elif state.ndim != 1:
        raise ValueError(f"{model} model expects a 1-d array")
    if not np.isfinite(state).all():
        raise ValueError("configuration entries must be finite")

    caps = [p.cap for p in policies if getattr(p, "is_cap", False)]
    if not caps:
        raise ValueError("run_trajectory needs an explicit MaxSteps policy")
    cap = min(caps)
    events = [p for p in policies if not getattr(p, "is_cap", False)]

    need_range = any(getattr(p, "needs_range", False) for p in events)
    if model == "scalar":
        tracker = _ScalarTracker(state)
    elif model == "box":
        tracker = _BoxTracker(state, track_diameter=need_range)
    else:
        tracker = _CircleTracker(state)

    pending = [(p, p.bind(model, tracker)) for p in events]
    hits: dict = {}
    for p, pred in list(pending):
        if pred():
            hits[p] = 0
            pending = [(q, f) for q, f in pending if q is not p]

    from .observables import make_frame  # deferred: avoids an import cycle

    if observers and observe_every > 0:
        frame = make_frame(model, state, 0)
        for obs in observers:
            obs(frame)

    n = len(state)
    k = 0
    run_to_cap = not events
    x = state
    last_observed = 0
    while k < cap and (pending or run_to_cap):
        i, j = select_pair(rng, n)
        if model == "scalar":
            xi = x.item(i)
            xj = x.item(j)
            if xi != xj:
                if xi < xj:
                    lo, w = xi, xj - xi
                else:
                    lo, w = xj, xi - xj
                ni = lo + w * rng.random()
                nj = lo + w * rng.random()
                x[i] = ni
                x[j] = nj
                tracker.update2(xi, xj, ni, nj)
        elif model == "box":
            d = x[j] - x[i]
            if d.any():
                oi = x[i].tolist()
                oj = x[j].tolist()
                l1 = rng.random()
                l2 = rng.random()
                xi = x[i].copy()
                x[i] = xi + l1 * d
                x[j] = xi + l2 * d
                tracker.update_rows(i, j, oi, oj, x[i].tolist(), x[j].tolist())
        else:
            arc = geodesic_arc(x.item(i), x.item(j))
            if arc is not None:
                s, ln = arc
                x[i] = (s + ln * rng.random()) % TWO_PI
                x[j] = (s + ln * rng.random()) % TWO_PI
            tracker.recompute()
        k += 1

        if pending:
            fired = None
            for item in pending:
                if item[1]():
                    hits[item[0]] = k
                    fired = item
            if fired is not None:
                pending = [it for it in pending if it[0] not in hits]

        if observers and observe_every > 0 and k - last_observed >= observe_every:
            frame = make_frame(model, state, k)
            for obs in observers:
                obs(frame)
            last_observed = k

    for p, _ in pending:
        hits[p] = None
    if observers and observe_every > 0 and k != last_observed:
        frame = make_frame(model, state, k)
        for obs in observers:
            obs(frame)

    return TrialRecord(hits=hits, cap_hit=bool(pending), steps=k,
                       final_state=state)
