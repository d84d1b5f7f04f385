"""Stopping policies: first-hit predicates evaluated along a trajectory.

Each policy is a small frozen dataclass (hashable, usable as a dict
key).  Policies are evaluated two ways that must agree:

* bound to a trajectory's running trackers (`policy.bind`), the fast
  route used inside the simulation loop;
* against an exact observable frame (`check`), the reference route used
  by tests and offline analysis.

Thresholds follow the two families used throughout: exact definitions
(range <= eps; ordered-pair square sum <= N * eps^2) and the experiment
variants (square sum <= 2 * eps^2 per dimension; largest empty circle
gap >= 2*pi - eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


class PolicyModelMismatch(ValueError):
    """A policy was applied to a model it is not defined for."""


def _reject(policy, model):
    raise PolicyModelMismatch(f"{policy!r} does not apply to the {model!r} model")


@dataclass(frozen=True)
class RangeThreshold:
    """Fires when the configuration's range (diameter in a box) is <= epsilon."""

    epsilon: float
    needs_range = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def bind(self, model, tracker):
        if model == "circle":
            _reject(self, model)
        eps = self.epsilon
        return lambda: tracker.range_leq(eps)


@dataclass(frozen=True)
class LyapunovThreshold:
    """Fires when the ordered-pair square sum (total, in a box) is <= tau."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def bind(self, model, tracker):
        if model == "circle":
            _reject(self, model)
        tau = self.tau
        return lambda: tracker.lyap_leq(tau)


@dataclass(frozen=True)
class VectorLyapunovThreshold:
    """Fires when every per-dimension square sum is <= tau (box only)."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def bind(self, model, tracker):
        if model != "box":
            _reject(self, model)
        tau = self.tau
        return lambda: tracker.lyap_dims_leq(tau)


@dataclass(frozen=True)
class HalfDisk:
    """Fires when all angles fit strictly inside an open half-circle."""

    def bind(self, model, tracker):
        if model != "circle":
            _reject(self, model)
        return tracker.half_disk


@dataclass(frozen=True)
class CircleArc:
    """Fires when the largest empty gap reaches 2*pi - epsilon.

    Only defined for epsilon < 2*pi/3; the behaviour of the arc-based
    stopping rule for larger epsilon is unspecified and rejected here.
    """

    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon < TWO_PI / 3:
            raise ValueError(
                f"CircleArc needs 0 < epsilon < 2*pi/3, got {self.epsilon}"
            )

    def bind(self, model, tracker):
        if model != "circle":
            _reject(self, model)
        g = TWO_PI - self.epsilon
        return lambda: tracker.gamma_geq(g)


@dataclass(frozen=True)
class MaxSteps:
    """Hard cap on interaction count; every run must carry one."""

    cap: int
    is_cap = True

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")

    def bind(self, model, tracker):  # pragma: no cover - never event-bound
        raise TypeError("MaxSteps is a cap, not an event policy")


def default_step_cap(theoretical_bound=None) -> int:
    """10x the applicable closed-form bound when that is usable, else 1e8."""
    if theoretical_bound is not None and math.isfinite(theoretical_bound):
        cap = 10.0 * float(theoretical_bound)
        if 1.0 <= cap < 1e9:
            return int(math.ceil(cap))
    return 10**8


def check(policy, frame) -> bool:
    """Evaluate a policy against an exact observable frame."""
    model = frame.model
    if isinstance(policy, MaxSteps):
        return frame.step >= policy.cap
    if isinstance(policy, RangeThreshold):
        if model == "circle":
            _reject(policy, model)
        return frame.value_range <= policy.epsilon
    if isinstance(policy, LyapunovThreshold):
        if model == "circle":
            _reject(policy, model)
        return frame.lyapunov <= policy.tau
    if isinstance(policy, VectorLyapunovThreshold):
        if model != "box":
            _reject(policy, model)
        return all(v <= policy.tau for v in frame.lyapunov_dims)
    if isinstance(policy, HalfDisk):
        if model != "circle":
            _reject(policy, model)
        return frame.half_disk is not None
    if isinstance(policy, CircleArc):
        if model != "circle":
            _reject(policy, model)
        return frame.gamma_max >= TWO_PI - policy.epsilon
    raise TypeError(f"unknown policy {policy!r}")
