"""Birth-death absorption chain: closed form vs. linear solve vs. Chebyshev
inverse, with expected values frozen before implementation.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab.markov import (
    absorption_asymptotic,
    absorption_closed_form,
    absorption_solve,
    b_inverse_entry,
    chain_c,
    chebyshev_U,
)

# frozen oracles
CLOSED_1_025 = 4.0
CLOSED_5_01 = 83030.0
ASYM_LOG10_20_001 = 39.912703891951


# ---------------------------------------------------------------- chebyshev


def test_chebyshev_base_cases():
    assert chebyshev_U(0, 0.3) == 1.0
    assert chebyshev_U(1, 2.0) == pytest.approx(4.0, rel=1e-12)
    assert chebyshev_U(2, 1.0) == 3.0
    assert chebyshev_U(3, -1.0) == -4.0


def test_chebyshev_at_unit_arguments():
    # U_i(1) = i + 1, U_i(-1) = (-1)^i (i + 1)
    for i in range(12):
        assert chebyshev_U(i, 1.0) == i + 1
        assert chebyshev_U(i, -1.0) == (-1) ** i * (i + 1)


def test_chebyshev_trig_form_inside():
    # U_i(cos t) = sin((i+1)t) / sin t
    for i in range(8):
        for t in (0.3, 1.1, 2.0):
            want = math.sin((i + 1) * t) / math.sin(t)
            assert chebyshev_U(i, math.cos(t)) == pytest.approx(want, abs=1e-10)


@given(st.integers(2, 50), st.floats(-20, 20))
def test_chebyshev_recurrence(i, x):
    # U_i = 2x U_{i-1} - U_{i-2}; mixed tolerance since U has roots in (-1,1)
    lhs = chebyshev_U(i, x)
    rhs = 2 * x * chebyshev_U(i - 1, x) - chebyshev_U(i - 2, x)
    scale = max(1.0, abs(lhs), abs(rhs))
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_chebyshev_growth_outside():
    # for |x| > 1 values grow like (|x| + sqrt(x^2-1))^i and stay finite in log
    v = chebyshev_U(40, 3.0)
    assert v > 0
    assert math.log10(v) == pytest.approx(
        40 * math.log10(3 + math.sqrt(8.0)), rel=1e-3
    )


# ------------------------------------------------------------------ chain_c


def test_chain_c_values():
    assert chain_c(3) == pytest.approx(1 / 243, rel=1e-14)
    assert chain_c(4) == pytest.approx(1 / 972, rel=1e-14)


def test_chain_c_rejects_small_n():
    with pytest.raises(ValueError):
        chain_c(2)


def test_chain_c_below_half():
    for n in range(3, 50):
        assert 0 < chain_c(n) < 0.5


# -------------------------------------------------------------- closed form


def test_closed_form_small_cases():
    assert absorption_closed_form(1, 0.25) == pytest.approx(CLOSED_1_025, rel=1e-14)
    assert absorption_closed_form(2, 1 / 3) == pytest.approx(12.0, rel=1e-13)
    assert absorption_closed_form(5, 0.1) == pytest.approx(CLOSED_5_01, rel=1e-12)


def test_closed_form_one_state_is_reciprocal():
    for c in (0.01, 0.2, 0.49):
        assert absorption_closed_form(1, c) == pytest.approx(1 / c, rel=1e-12)


def test_closed_form_rejects_unsupported_regime():
    with pytest.raises(ValueError):
        absorption_closed_form(3, 0.5)
    with pytest.raises(ValueError):
        absorption_closed_form(3, 0.75)
    with pytest.raises(ValueError):
        absorption_closed_form(3, 0.0)
    with pytest.raises(ValueError):
        absorption_closed_form(0, 0.1)


def test_closed_form_monotone_in_n():
    for c in (0.05, 0.3):
        vals = [absorption_closed_form(n, c) for n in range(1, 12)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


# -------------------------------------------------------------------- solve


def test_solve_two_state_oracle():
    e = absorption_solve(2, 1 / 3)
    assert e[0] == pytest.approx(12.0, rel=1e-12)
    assert e[1] == pytest.approx(9.0, rel=1e-12)


def test_solve_decreasing_toward_absorption():
    e = absorption_solve(6, 0.2)
    assert all(b < a for a, b in zip(e, e[1:]))
    assert e[-1] >= 1.0


def test_solve_satisfies_recurrence_exactly():
    # E_1 = 1 + (1-c) E_1 + c E_2 ... checked via the defining equations
    n, c = 5, 0.3
    e = absorption_solve(n, c)
    assert c * (e[0] - e[1]) == pytest.approx(1.0, rel=1e-10)
    for i in range(1, n - 1):
        lhs = e[i] - (1 - c) * e[i - 1] - c * e[i + 1]
        assert lhs == pytest.approx(1.0, rel=1e-10)
    assert e[n - 1] - (1 - c) * e[n - 2] == pytest.approx(1.0, rel=1e-10)


def test_solve_allows_c_above_half():
    # the linear system stays solvable where the closed form is unsupported
    e = absorption_solve(3, 0.6)
    assert e[0] > e[1] > e[2] > 0


def test_closed_form_matches_solve_on_grid():
    # the acceptance-level agreement check, run at its full pinned tolerance
    for n in range(1, 13):
        for c in (0.01, 0.1, 0.3, 0.45):
            closed = absorption_closed_form(n, c)
            solved = absorption_solve(n, c)[0]
            assert abs(closed - solved) / solved <= 1e-9, (n, c)


def test_solve_large_n_path():
    # beyond the exact-arithmetic cutoff the tridiagonal float path kicks in
    e = absorption_solve(80, 0.4)
    assert e.shape == (80,)
    assert all(b < a for a, b in zip(e, e[1:]))
    # spot check against the closed form in a well-conditioned regime
    assert e[0] == pytest.approx(absorption_closed_form(80, 0.4), rel=1e-9)


# --------------------------------------------------------------- asymptotic


def test_asymptotic_one_state():
    a = absorption_asymptotic(1, 0.25)
    assert a.value == pytest.approx(3.0, rel=1e-12)


def test_asymptotic_log10_oracle():
    a = absorption_asymptotic(20, 0.01)
    assert a.log10 == pytest.approx(ASYM_LOG10_20_001, rel=1e-12)
    assert a.value == pytest.approx(10.0**ASYM_LOG10_20_001, rel=1e-9)


def test_asymptotic_overflow_marker():
    a = absorption_asymptotic(1200, 1e-4)
    assert math.isinf(a.value)
    assert a.log10 == pytest.approx(1200 * math.log10((1 - 1e-4) / 1e-4), rel=1e-12)


def test_exact_to_asymptotic_ratio_band():
    # for small c the closed form approaches the geometric-growth law from
    # above: ratio in (1, 1 + 10 c / (1 - 2c)) over the regime we rely on
    for n in (10, 14, 20):
        for c in (0.01, 0.05, 0.1):
            ratio = absorption_closed_form(n, c) / absorption_asymptotic(n, c).value
            assert 1.0 < ratio < 1.0 + 10 * c / (1 - 2 * c), (n, c)


# --------------------------------------------------- inverse-matrix pathway


def _toeplitz_part(n: int, c: float) -> np.ndarray:
    # the constant-diagonal factor of the absorption system: the system
    # matrix itself differs only in its (1,1) entry (c instead of 1)
    b = np.eye(n)
    for i in range(n - 1):
        b[i, i + 1] = -c
        b[i + 1, i] = -(1 - c)
    return b


def test_b_inverse_entries_match_numpy():
    for n in (2, 4, 8):
        for c in (0.2, 0.4):
            inv = np.linalg.inv(_toeplitz_part(n, c))
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    got = b_inverse_entry(n, c, i, j)
                    assert got == pytest.approx(inv[i - 1, j - 1], abs=1e-8), (
                        n,
                        c,
                        i,
                        j,
                    )


def test_b_inverse_entry_at_c_half():
    # c = 1/2 sits on the polynomial boundary of the Chebyshev argument
    n, c = 5, 0.5
    inv = np.linalg.inv(_toeplitz_part(n, c))
    for i in (1, 3, 5):
        for j in (1, 2, 4):
            assert b_inverse_entry(n, c, i, j) == pytest.approx(
                inv[i - 1, j - 1], abs=1e-10
            )


def test_rank_one_update_reproduces_expectations():
    # restoring the corner entry via the rank-one update and row-summing the
    # resulting inverse must reproduce the absorption expectations
    n, c = 6, 0.3
    e = absorption_solve(n, c)
    binv = np.array(
        [
            [b_inverse_entry(n, c, i, j) for j in range(1, n + 1)]
            for i in range(1, n + 1)
        ]
    )
    denom = 1.0 + (c - 1.0) * binv[0, 0]
    ainv = binv - (c - 1.0) * np.outer(binv[:, 0], binv[0, :]) / denom
    np.testing.assert_allclose(ainv.sum(axis=1), e, rtol=1e-9)


def test_exact_solver_agrees_with_rational_arithmetic():
    # independent Fraction-based elimination on the same tridiagonal system
    n, c = 7, Fraction(1, 10)
    a = [[Fraction(0)] * n for _ in range(n)]
    a[0][0] = c
    for i in range(1, n):
        a[i][i] = Fraction(1)
    for i in range(n - 1):
        a[i][i + 1] = -c
        a[i + 1][i] = -(1 - c)
    rhs = [Fraction(1)] * n
    for col in range(n):  # forward elimination, no pivoting needed
        for row in range(col + 1, n):
            if a[row][col]:
                m = a[row][col] / a[col][col]
                for k in range(col, n):
                    a[row][k] -= m * a[col][k]
                rhs[row] -= m * rhs[col]
    sol = [Fraction(0)] * n
    for row in range(n - 1, -1, -1):
        acc = rhs[row] - sum(a[row][k] * sol[k] for k in range(row + 1, n))
        sol[row] = acc / a[row][row]
    got = absorption_solve(n, float(c))
    for i in range(n):
        assert got[i] == pytest.approx(float(sol[i]), rel=1e-12)
