"""Closed-form expectations and finite-time bounds for the pairwise dynamics.

Everything here is a formula, no simulation: the one-step contraction of the
pairwise-spread functional, the geometric decay of its expectation, and the
step-count guarantees that follow for the interval, the box, and the circle.
Monte Carlo estimates produced elsewhere in the package are compared against
these in the tests and in the experiment drivers.

Conventions used throughout:

* ``lyapunov0`` denotes the initial value of the pairwise-spread functional
  sum_{i != j} (x_i - x_j)^2 (per coordinate, summed over coordinates for the
  box), matching ``observables.lyapunov_scalar``.
* Time bounds come back as a TimeBound with an ``exact`` member (the sharp
  constant 3N(N-1)/(2N+1)) and a ``simplified`` member (the looser 3N/2
  constant that the empirical scaling laws are phrased in).  When the start
  already satisfies the target the logarithm is clamped at zero and
  ``clamped`` is set; the additive constant keeps the bound a valid upper
  bound for the first step regardless.
"""

import math
from typing import NamedTuple, Optional

import numpy as np

from .markov import LogValue

__all__ = [
    "TimeBound",
    "GossipBound",
    "EdsmBounds",
    "contraction_factor",
    "expected_lyapunov",
    "expected_initial_lyapunov_uniform",
    "expected_range_sq_bounds",
    "expected_range_sq_bounds_vector",
    "expected_state",
    "t_eps_bound_scalar",
    "t_eps_bound_interval",
    "t_eps_bound_uniform_init",
    "t_eps_bound_vector",
    "gossip_time_bound",
    "edsm_bounds",
    "t_hd_bound",
    "t_eps_bound_circle",
]

_DEFAULT_DELTA = math.sqrt(3.0) / 2.0
_MAX_LOG10 = 308.0


class TimeBound(NamedTuple):
    exact: float
    simplified: float
    clamped: bool


class GossipBound(NamedTuple):
    exact: float
    simplified: float
    q: float


class EdsmBounds(NamedTuple):
    conservative: float
    direct: float


def _check_agents(n: int) -> None:
    if n < 2:
        raise ValueError("pairwise dynamics needs at least 2 agents")


def contraction_factor(n: int) -> float:
    """Expected one-step multiplier of the pairwise-spread functional.

    f(N) = 1 - (2N + 1) / (3N(N-1)); strictly inside (0, 1) for N >= 2 and
    increasing toward 1, so large groups mix slower per interaction.
    """
    _check_agents(n)
    return 1.0 - (2.0 * n + 1.0) / (3.0 * n * (n - 1.0))


def expected_lyapunov(k: int, lyapunov0: float, n: int) -> float:
    """E of the pairwise spread after k interactions: lyapunov0 * f(N)^k."""
    if k < 0:
        raise ValueError("step count must be >= 0")
    if lyapunov0 < 0:
        raise ValueError("pairwise spread cannot be negative")
    return lyapunov0 * contraction_factor(n) ** k


def expected_initial_lyapunov_uniform(n: int, a: float, b: float) -> float:
    """E of the pairwise spread for N iid uniform agents on [a, b].

    N(N-1) (b-a)^2 / 6 -- each ordered pair contributes the uniform
    mean-square difference (b-a)^2 / 6.
    """
    _check_agents(n)
    if b < a:
        raise ValueError("interval endpoints out of order")
    return n * (n - 1.0) * (b - a) ** 2 / 6.0


# --------------------------------------------------------------- time bounds


def _exact_constant(n: int) -> float:
    return 3.0 * n * (n - 1.0) / (2.0 * n + 1.0)


def _clamped_log(arg: float) -> tuple[float, bool]:
    if arg < 1.0:
        return 0.0, True
    return math.log(arg), False


def _time_bound_from_spread(
    n: int, eps: float, spread_exact: float, spread_simplified: float
) -> TimeBound:
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    target = n * eps * eps
    ln_e, cl_e = _clamped_log(spread_exact / target)
    ln_s, cl_s = _clamped_log(spread_simplified / target)
    return TimeBound(
        exact=_exact_constant(n) * (ln_e + 1.0),
        simplified=1.5 * n * (ln_s + 1.0),
        clamped=cl_e or cl_s,
    )


def _check_eps(eps: float) -> None:
    if eps <= 0:
        raise ValueError("tolerance must be positive")


def t_eps_bound_scalar(n: int, eps: float, lyapunov0: float) -> TimeBound:
    """Steps until E of the range is <= eps, from a known initial spread.

    Both members have the shape C * (ln(L0 / (N eps^2)) + 1); they differ
    only in the constant C (sharp vs. 3N/2).
    """
    _check_agents(n)
    _check_eps(eps)
    if lyapunov0 < 0:
        raise ValueError("pairwise spread cannot be negative")
    return _time_bound_from_spread(n, eps, lyapunov0, lyapunov0)


def t_eps_bound_interval(n: int, eps: float, a: float, b: float) -> TimeBound:
    """Scalar bound under the worst-case spread for states inside [a, b].

    No distributional assumption: the spread of any configuration in the
    interval is at most N^2 (b-a)^2 / 2.
    """
    if b <= a:
        raise ValueError("interval endpoints out of order")
    _check_agents(n)
    worst = n * n * (b - a) ** 2 / 2.0
    return _time_bound_from_spread(n, eps, worst, worst)


def t_eps_bound_uniform_init(n: int, eps: float, a: float, b: float) -> TimeBound:
    """Scalar bound for iid uniform starts on [a, b].

    The exact member uses the true initial expectation N(N-1)(b-a)^2/6; the
    simplified member relaxes N(N-1) to N^2 so its constant term matches the
    form the empirical fits are quoted in.
    """
    if b <= a:
        raise ValueError("interval endpoints out of order")
    _check_agents(n)
    true_spread = expected_initial_lyapunov_uniform(n, a, b)
    relaxed = n * n * (b - a) ** 2 / 6.0
    return _time_bound_from_spread(n, eps, true_spread, relaxed)


def t_eps_bound_vector(
    n: int,
    dim: int,
    eps: float,
    *,
    lyapunov_total0: Optional[float] = None,
    a: Optional[float] = None,
    b: Optional[float] = None,
    uniform_init: bool = False,
) -> TimeBound:
    """Box analogue of the scalar bound, driven by the summed spread.

    Exactly one way of fixing the initial spread must be given: either
    ``lyapunov_total0`` (the per-dimension spreads summed) or a cube
    ``[a, b]^dim``, the latter optionally with ``uniform_init=True`` for iid
    uniform coordinates instead of the worst case.
    """
    _check_agents(n)
    _check_eps(eps)
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    have_domain = a is not None or b is not None
    if lyapunov_total0 is not None:
        if have_domain or uniform_init:
            raise ValueError("give either an initial spread or a cube, not both")
        if lyapunov_total0 < 0:
            raise ValueError("pairwise spread cannot be negative")
        return _time_bound_from_spread(n, eps, lyapunov_total0, lyapunov_total0)
    if a is None or b is None:
        raise ValueError("need lyapunov_total0, or both cube endpoints a and b")
    if b <= a:
        raise ValueError("cube endpoints out of order")
    width_sq = (b - a) ** 2
    if uniform_init:
        true_spread = dim * n * (n - 1.0) * width_sq / 6.0
        relaxed = dim * n * n * width_sq / 6.0
        return _time_bound_from_spread(n, eps, true_spread, relaxed)
    worst = dim * n * n * width_sq / 2.0
    return _time_bound_from_spread(n, eps, worst, worst)


# ---------------------------------------------------------- range expectation


def expected_range_sq_bounds(k: int, n: int, lyapunov0: float) -> tuple[float, float]:
    """Two-sided envelope for E(range^2) after k steps on the line.

    The spread functional is sandwiched between N r^2 and (N^2/2) r^2, so its
    exact geometric decay pins E(r_k^2) into [2 f^k L0 / N^2, f^k L0 / N].
    """
    decayed = expected_lyapunov(k, lyapunov0, n)
    return 2.0 * decayed / (n * n), decayed / n


def expected_range_sq_bounds_vector(
    k: int, n: int, lyapunov_total0: float
) -> tuple[float, float]:
    """Box version: the lower sandwich constant weakens from N^2 to N^3/2."""
    decayed = expected_lyapunov(k, lyapunov_total0, n)
    return 2.0 * decayed / (n * n * n), decayed / n


def expected_state(k: int, x0: np.ndarray) -> np.ndarray:
    """Expected configuration after k steps: deviations shrink by (N-2)/(N-1).

    Works per coordinate for box states (agents along axis 0).  For N = 2 the
    expected state is the common mean from the first step on.
    """
    if k < 0:
        raise ValueError("step count must be >= 0")
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    _check_agents(n)
    center = x0.mean(axis=0)
    factor = (1.0 - 1.0 / (n - 1.0)) ** k
    return center + factor * (x0 - center)


# ----------------------------------------------------------- gossip and edsm


def gossip_time_bound(n: int, eps: float, a: float, b: float) -> GossipBound:
    """Steps until the relative range of positive-mean states drops below eps.

    The interval's position enters through q: the squared endpoint ratio when
    [a, b] avoids zero (either sign) and 0 when it straddles zero.  Requires
    eps in (0, 1) -- the target is relative, not absolute.
    """
    _check_agents(n)
    if not 0.0 < eps < 1.0:
        raise ValueError("relative tolerance must lie in (0, 1)")
    if b <= a:
        raise ValueError("interval endpoints out of order")
    if a >= 0.0:
        q = a * a / (b * b)
    elif b <= 0.0:
        q = b * b / (a * a)
    else:
        q = 0.0
    exact = (-3.0 * math.log(eps) + math.log(2.0 * (n - 1.0) * (1.0 - q))) / -math.log(
        contraction_factor(n)
    )
    simplified = 1.5 * n * math.log(2.0 * (1.0 - q) * n / eps**3)
    return GossipBound(exact, simplified, q)


def edsm_bounds(alpha: float, eps: float) -> EdsmBounds:
    """Step counts at which a mean-preserving quantity decayed by (1 - alpha)
    per step is guaranteed below eps.

    ``direct`` is the plain logarithmic crossing time; ``conservative`` adds
    the 1/alpha overshoot margin that stays valid under integer rounding of
    the step index.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("decay rate must lie in (0, 1)")
    if not 0.0 < eps < 1.0:
        raise ValueError("tolerance must lie in (0, 1)")
    direct = -math.log(eps) / -math.log1p(-alpha)
    return EdsmBounds(direct + 1.0 / alpha, direct)


# ------------------------------------------------------------------- circle


def t_hd_bound(n: int, delta: float = _DEFAULT_DELTA) -> LogValue:
    """Expected-step bound for collapsing the circle into a half disk.

    Product of floor(N/2) per-stage success probabilities, plus the stage
    count: (1/c_delta)^floor(N/2) + 2 floor(N/2), where c_delta couples the
    witness-angle margin delta to a per-interaction success probability.  The
    default delta = sqrt(3)/2 minimizes the bound; there 1/c_delta is the
    integer 27 N^2 (N-1)^2 / 4 and the result is computed in exact integer
    arithmetic.  Values beyond float range come back as inf with the exact
    log10 still attached.
    """
    if n < 3:
        raise ValueError("the circle dynamics needs at least 3 agents")
    if not 0.0 < delta < 1.0:
        raise ValueError("witness margin delta must lie in (0, 1)")
    m = n // 2
    if delta == _DEFAULT_DELTA:
        base = 27 * n * n * (n - 1) * (n - 1) // 4
        total = base**m + 2 * m
        log10 = math.log10(total)
        value = float(total) if log10 <= _MAX_LOG10 else math.inf
        return LogValue(value, log10)
    theta = math.pi / 2.0 - math.acos(delta)
    c_delta = (1.0 - 2.0 * theta / math.pi) * (
        theta / math.pi * 2.0 / (n * (n - 1.0))
    ) ** 2
    log10 = -m * math.log10(c_delta)
    if log10 > _MAX_LOG10:
        return LogValue(math.inf, log10)
    value = 10.0**log10 + 2.0 * m
    return LogValue(value, math.log10(value))


def t_eps_bound_circle(n: int, eps: float, b_hd: Optional[float] = None) -> float:
    """Steps until the occupied arc is within eps of closing, in expectation.

    Two phases: reach a half disk (cost ``b_hd``, by default the
    ``t_hd_bound`` value), then contract inside it like a line segment of
    length pi -- hence the pi^2/2 worst-case spread constant.  Tolerances
    must stay below 2 pi / 3 for the arc target to identify a contracted
    state.
    """
    if n < 3:
        raise ValueError("the circle dynamics needs at least 3 agents")
    if not 0.0 < eps < 2.0 * math.pi / 3.0:
        raise ValueError("arc tolerance must lie in (0, 2 pi / 3)")
    if b_hd is None:
        b_hd = t_hd_bound(n).value
    elif b_hd < 0:
        raise ValueError("half-disk phase cost cannot be negative")
    contraction_phase = 1.5 * n * math.log(n / eps**2) + 1.5 * n * (
        math.log(math.pi**2 / 2.0) + 1.0
    )
    return b_hd + contraction_phase
