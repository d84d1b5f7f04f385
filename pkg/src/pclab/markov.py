"""Absorbing birth-death chain used to bound the half-disk hitting time.

The chain has transient states 0..n-1 plus an absorbing state n.  From any
transient state it advances with probability c and falls all the way back by
one with probability 1 - c; the absorbing state models "enough consecutive
progress has accumulated".  Three routes to the expected absorption time
E_0 (started from the far end) live here:

* ``absorption_closed_form`` -- the explicit product formula,
* ``absorption_solve`` -- direct solution of the linear system (I - W')E = 1,
* ``absorption_asymptotic`` -- the geometric-growth law ((1-c)/c)^n.

They are deliberately independent implementations; the tests force agreement.
The system matrix is tridiagonal and, apart from its (1,1) entry, Toeplitz,
so its constant-diagonal part inverts in closed form through Chebyshev
polynomials of the second kind (``b_inverse_entry``); a rank-one update then
restores the corner.

The linear solve uses exact rational arithmetic up to ``_EXACT_SOLVE_MAX``
states.  Float LU with partial pivoting is useless here for small c: the
condition number grows like ((1-c)/c)^n, and at n = 12, c = 0.01 the solved
E_0 carries ~100% relative error while the closed form is still exact to a
few ulp.  The exact solve removes the solver from the comparison entirely.
"""

import math
from fractions import Fraction
from typing import NamedTuple

import numpy as np

__all__ = [
    "LogValue",
    "absorption_asymptotic",
    "absorption_closed_form",
    "absorption_solve",
    "b_inverse_entry",
    "chain_c",
    "chebyshev_U",
]

_EXACT_SOLVE_MAX = 64
_LN2 = math.log(2.0)
# largest base-10 exponent a float can carry; beyond this the value field
# becomes inf and only log10 stays meaningful
_MAX_LOG10 = 308.0


class LogValue(NamedTuple):
    """A nonnegative quantity carried alongside its base-10 logarithm.

    ``value`` is ``math.inf`` when the quantity exceeds float range;
    ``log10`` is always finite and exact to working precision.
    """

    value: float
    log10: float


def chebyshev_U(i: int, x: float) -> float:
    """Chebyshev polynomial of the second kind, U_i(x).

    Evaluated through the trigonometric form inside [-1, 1], the hyperbolic
    form outside (arranged so intermediate terms cannot overflow before the
    result does), and the polynomial limit (+-1)^i (i+1) exactly at +-1.
    """
    if i < 0:
        raise ValueError("order must be >= 0")
    ax = abs(x)
    if ax == 1.0:
        val = float(i + 1)
        return val if x > 0.0 or i % 2 == 0 else -val
    if ax < 1.0:
        th = math.acos(x)
        return math.sin((i + 1) * th) / math.sin(th)
    th = math.acosh(ax)
    a = (i + 1) * th
    # sinh(a)/sinh(th) = e^(a-th) (1 - e^(-2a)) / (1 - e^(-2th))
    val = math.exp(a - th) * math.expm1(-2.0 * a) / math.expm1(-2.0 * th)
    if x < 0.0 and i % 2 == 1:
        val = -val
    return val


def chain_c(n_agents: int) -> float:
    """Per-step probability of unit progress for the N-agent circle chain.

    This is the single-interaction success probability fed into the
    birth-death chain; it is < 1/2 for every admissible N.
    """
    if n_agents < 3:
        raise ValueError("the circle chain needs at least 3 agents")
    return 4.0 / (27.0 * n_agents * n_agents * (n_agents - 1) * (n_agents - 1))


def _check_transient_count(n: int) -> None:
    if n < 1:
        raise ValueError("need at least one transient state")


def absorption_closed_form(n: int, c: float) -> float:
    """Expected steps to absorption from the far state, in closed form.

    Only the sub-critical regime 0 < c < 1/2 is supported; there the chain
    drifts away from absorption and E_0 grows like ((1-c)/c)^n.  The first
    factor is assembled in log space so that small c cannot overflow the
    intermediate (1/q)^n term before the final product is formed.
    """
    _check_transient_count(n)
    if not 0.0 < c < 0.5:
        raise ValueError("closed form holds only for 0 < c < 1/2")
    q = c / (1.0 - c)
    qn = q**n
    qn1 = q * qn
    # log of A = (1/q)^n (1 - q^n) / (1 - q); first factor is 1 + A
    log_a = -n * math.log(q) + math.log1p(-qn) - math.log1p(-q)
    log_first = log_a + math.log1p(math.exp(-log_a))
    second = (1.0 - qn) / ((1.0 - 2.0 * c) * (1.0 - qn1)) - (n / c) * qn1 / (1.0 - qn1)
    return math.exp(log_first + math.log(second))


def absorption_solve(n: int, c: float) -> np.ndarray:
    """Expected absorption times (E_0, ..., E_{n-1}) by solving the system.

    The matrix is tridiagonal: diagonal (c, 1, ..., 1), superdiagonal -c,
    subdiagonal -(1-c), right-hand side all ones.  Up to _EXACT_SOLVE_MAX
    states the elimination runs in exact rational arithmetic (see the module
    docstring for why float LU is disqualified); past that a float Thomas
    sweep takes over, which is benign because its recurrences involve only
    same-sign additions.
    """
    _check_transient_count(n)
    if not 0.0 < c < 1.0:
        raise ValueError("advance probability must lie in (0, 1)")
    if n <= _EXACT_SOLVE_MAX:
        cv: object = Fraction(c)
        one: object = Fraction(1)
    else:
        cv = c
        one = 1.0
    sub = -(one - cv)
    sup = -cv
    diag = [cv] + [one] * (n - 1)
    rhs = [one] * n
    for i in range(1, n):
        m = sub / diag[i - 1]
        diag[i] = diag[i] - m * sup
        rhs[i] = rhs[i] - m * rhs[i - 1]
    out = [one] * n
    out[n - 1] = rhs[n - 1] / diag[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = (rhs[i] - sup * out[i + 1]) / diag[i]
    return np.array([float(v) for v in out])


def absorption_asymptotic(n: int, c: float) -> LogValue:
    """Leading-order growth law ((1-c)/c)^n for the expected absorption time.

    Returned as a LogValue: for the chain's actual parameters the value
    overflows float range already at moderate N, but its logarithm is the
    quantity the bounds are stated in anyway.
    """
    _check_transient_count(n)
    if not 0.0 < c < 0.5:
        raise ValueError("growth law holds only for 0 < c < 1/2")
    log10 = n * math.log10((1.0 - c) / c)
    value = math.inf if log10 > _MAX_LOG10 else 10.0**log10
    return LogValue(value, log10)


def _log_sinh(a: float) -> float:
    # log(sinh(a)) for a > 0, safe against overflow of sinh itself
    return a + math.log1p(-math.exp(-2.0 * a)) - _LN2


def b_inverse_entry(n: int, c: float, i: int, j: int) -> float:
    """Entry (i, j), 1-indexed, of the inverse of the Toeplitz part.

    The Toeplitz part has unit diagonal, superdiagonal -c, subdiagonal
    -(1-c); its inverse is the classical Chebyshev ratio

        c^(j-i) / sqrt(c(1-c))^(j-i+1) * U_{i-1}(d) U_{n-j}(d) / U_n(d)

    for i <= j (mirrored via (1-c)^(i-j) for i > j) with
    d = 1/(2 sqrt(c(1-c))) >= 1.  Since the argument never enters (-1, 1),
    the ratio is evaluated through hyperbolic logarithms, which keeps it
    finite even when the individual polynomial values overflow; d = 1
    (c = 1/2) falls back to the polynomial limit U_k(1) = k + 1.
    """
    _check_transient_count(n)
    if not 0.0 < c < 1.0:
        raise ValueError("advance probability must lie in (0, 1)")
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError("indices must lie in 1..n")
    log_pref = -0.5 * math.log(c * (1.0 - c)) + 0.5 * (j - i) * math.log(
        c / (1.0 - c)
    )
    p, q = (i, j) if i <= j else (j, i)
    d = 1.0 / (2.0 * math.sqrt(c * (1.0 - c)))
    if d == 1.0:
        return math.exp(log_pref) * p * (n - q + 1) / (n + 1)
    th = math.acosh(d)
    log_ratio = (
        _log_sinh(p * th)
        + _log_sinh((n - q + 1) * th)
        - _log_sinh(th)
        - _log_sinh((n + 1) * th)
    )
    return math.exp(log_pref + log_ratio)
