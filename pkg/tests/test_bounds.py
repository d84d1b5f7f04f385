"""Closed-form expectation and bound formulas, pinned against values
frozen from an independent hand/script computation before the module
was written.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pclab.bounds import (
    contraction_factor,
    edsm_bounds,
    expected_initial_lyapunov_uniform,
    expected_lyapunov,
    expected_range_sq_bounds,
    expected_range_sq_bounds_vector,
    expected_state,
    gossip_time_bound,
    t_eps_bound_circle,
    t_eps_bound_interval,
    t_eps_bound_scalar,
    t_eps_bound_uniform_init,
    t_eps_bound_vector,
    t_hd_bound,
)
from pclab.dynamics import rng_stream

# frozen oracle values (independent script, see commit history of the tests)
SCALAR_EXACT_2_01_L2 = 6.726204223185709
INTERVAL_SIMPL_10_001 = 177.29667426615424
UNIFORM_SIMPL_10_001 = 160.8174899361326
UNIFORM_EXACT_10_001 = 136.48892760108447
VECTOR_UNIF_SIMPL = 171.21469764453178
VECTOR_UNIF_EXACT = 145.4008199225695
GOSSIP_EXACT = 121.01075065311794
GOSSIP_SIMPL = 148.55231328804192
EDSM_PAIR = (31.258506273026672, 25.258506273026672)
T_HD_4 = 944788.0
T_HD_5 = 7290004.0
T_HD_4_LOG10 = 5.975334368552454
CIRCLE_BOUND_4 = 944839.5266628296


# -------------------------------------------------------------- contraction


def test_contraction_factor_values():
    assert contraction_factor(2) == pytest.approx(1 / 6, rel=1e-14)
    assert contraction_factor(5) == pytest.approx(49 / 60, rel=1e-14)
    assert contraction_factor(100) == pytest.approx(0.9932323232323232, rel=1e-14)


def test_contraction_factor_monotone_in_range():
    vals = [contraction_factor(n) for n in range(2, 200)]
    assert all(0 < v < 1 for v in vals)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_contraction_factor_rejects_small_n():
    with pytest.raises(ValueError):
        contraction_factor(1)


def test_expected_lyapunov():
    assert expected_lyapunov(0, 3.7, 9) == 3.7
    assert expected_lyapunov(1, 2.0, 2) == pytest.approx(1 / 3, rel=1e-14)
    vals = [expected_lyapunov(k, 5.0, 4) for k in range(50)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@given(st.integers(0, 30), st.integers(0, 30), st.floats(0.01, 100), st.integers(2, 40))
def test_expected_lyapunov_multiplicative(k1, k2, l0, n):
    two_step = expected_lyapunov(k2, expected_lyapunov(k1, l0, n), n)
    assert two_step == pytest.approx(expected_lyapunov(k1 + k2, l0, n), rel=1e-9)


def test_expected_initial_lyapunov_uniform():
    assert expected_initial_lyapunov_uniform(5, 0.0, 1.0) == pytest.approx(10 / 3)


# ------------------------------------------------------------- time bounds


def test_scalar_bound_oracle():
    b = t_eps_bound_scalar(2, 0.1, 2.0)
    assert b.exact == pytest.approx(SCALAR_EXACT_2_01_L2, rel=1e-12)
    assert not b.clamped


def test_scalar_bound_clamps_at_converged_start():
    n, eps = 7, 0.25
    b = t_eps_bound_scalar(n, eps, n * eps**2)  # log argument exactly 1
    assert b.exact == pytest.approx(3 * n * (n - 1) / (2 * n + 1), rel=1e-12)
    b2 = t_eps_bound_scalar(n, eps, n * eps**2 / 10)
    assert b2.clamped
    assert b2.exact == pytest.approx(3 * n * (n - 1) / (2 * n + 1), rel=1e-12)
    assert b2.simplified == pytest.approx(1.5 * n, rel=1e-12)


def test_interval_bound_oracle():
    b = t_eps_bound_interval(10, 0.01, 0.0, 1.0)
    assert b.simplified == pytest.approx(INTERVAL_SIMPL_10_001, rel=1e-12)


def test_interval_bound_sqrt2_width_constant_term():
    # width sqrt(2): ln((b-a)^2/2) = 0, simplified = (3/2)N ln(N/eps^2) + (3/2)N
    n, eps = 6, 0.05
    b = t_eps_bound_interval(n, eps, 0.0, math.sqrt(2.0))
    assert b.simplified == pytest.approx(
        1.5 * n * math.log(n / eps**2) + 1.5 * n, rel=1e-12
    )


def test_interval_bound_slope_in_log_eps():
    # d(bound)/d(-ln eps) = 3N for the simplified form
    n = 9
    b1 = t_eps_bound_interval(n, 1e-2, 0.0, 1.0).simplified
    b2 = t_eps_bound_interval(n, 1e-3, 0.0, 1.0).simplified
    assert (b2 - b1) / (math.log(1e-2) - math.log(1e-3)) == pytest.approx(
        3 * n, rel=1e-12
    )


def test_uniform_init_bound_oracle():
    b = t_eps_bound_uniform_init(10, 0.01, 0.0, 1.0)
    assert b.simplified == pytest.approx(UNIFORM_SIMPL_10_001, rel=1e-12)
    assert b.exact == pytest.approx(UNIFORM_EXACT_10_001, rel=1e-12)


@given(
    st.integers(2, 300),
    st.floats(1e-6, 0.5),
    st.floats(-5, 5),
    st.floats(0.01, 10),
)
def test_uniform_init_below_worst_case(n, eps, a, width):
    b = a + width
    lo = t_eps_bound_uniform_init(n, eps, a, b)
    hi = t_eps_bound_interval(n, eps, a, b)
    assert lo.simplified <= hi.simplified + 1e-9
    assert lo.exact <= hi.exact + 1e-9


def test_vector_bound_uniform_oracle():
    b = t_eps_bound_vector(10, 2, 0.01, a=0.0, b=1.0, uniform_init=True)
    assert b.simplified == pytest.approx(VECTOR_UNIF_SIMPL, rel=1e-12)
    assert b.exact == pytest.approx(VECTOR_UNIF_EXACT, rel=1e-12)


def test_vector_bound_d1_reduces_to_scalar():
    n, eps = 12, 0.02
    v = t_eps_bound_vector(n, 1, eps, a=0.0, b=1.0, uniform_init=True)
    s = t_eps_bound_uniform_init(n, eps, 0.0, 1.0)
    assert v.exact == pytest.approx(s.exact, rel=1e-12)
    assert v.simplified == pytest.approx(s.simplified, rel=1e-12)
    lv = t_eps_bound_vector(n, 1, eps, lyapunov_total0=3.3)
    ls = t_eps_bound_scalar(n, eps, 3.3)
    assert lv.exact == pytest.approx(ls.exact, rel=1e-12)


def test_vector_bound_given_l0_at_threshold():
    n, d, eps = 8, 3, 0.1
    b = t_eps_bound_vector(n, d, eps, lyapunov_total0=n * eps**2)
    assert b.simplified == pytest.approx(1.5 * n, rel=1e-12)


def test_vector_bound_argument_validation():
    with pytest.raises(ValueError):
        t_eps_bound_vector(5, 2, 0.1)  # neither L0 nor a domain
    with pytest.raises(ValueError):
        t_eps_bound_vector(5, 2, 0.1, lyapunov_total0=1.0, a=0.0, b=1.0)
    with pytest.raises(ValueError):
        t_eps_bound_vector(5, 2, 0.1, lyapunov_total0=1.0, uniform_init=True)


# --------------------------------------------------------- range / state


def test_range_sq_bounds_two_agent_cases():
    assert expected_range_sq_bounds(0, 2, 2.0) == pytest.approx((1.0, 1.0))
    lo, hi = expected_range_sq_bounds(
        0, 2, expected_initial_lyapunov_uniform(2, 0.0, 1.0)
    )
    assert (lo, hi) == pytest.approx((1 / 6, 1 / 6))
    lo1, hi1 = expected_range_sq_bounds(
        1, 2, expected_initial_lyapunov_uniform(2, 0.0, 1.0)
    )
    assert lo1 == pytest.approx(lo / 6, rel=1e-12)
    assert hi1 == pytest.approx(hi / 6, rel=1e-12)


def test_range_sq_bounds_uniform_matches_display_form():
    # (N-1)/(3N) f^k w^2  <=  E r_k^2  <=  (N-1)/6 f^k w^2
    n, k, w = 7, 3, 2.5
    l0 = expected_initial_lyapunov_uniform(n, 0.0, w)
    lo, hi = expected_range_sq_bounds(k, n, l0)
    fk = contraction_factor(n) ** k
    assert lo == pytest.approx((n - 1) / (3 * n) * fk * w**2, rel=1e-12)
    assert hi == pytest.approx((n - 1) / 6 * fk * w**2, rel=1e-12)


def test_range_sq_bounds_vector_display_form():
    # (N-1)/(3N^2) f^k D w^2 <= E r_k^2 <= (N-1)/6 f^k D w^2
    n, d, k, w = 6, 3, 2, 1.5
    total0 = d * expected_initial_lyapunov_uniform(n, 0.0, w)
    lo, hi = expected_range_sq_bounds_vector(k, n, total0)
    fk = contraction_factor(n) ** k
    assert lo == pytest.approx((n - 1) / (3 * n**2) * fk * d * w**2, rel=1e-12)
    assert hi == pytest.approx((n - 1) / 6 * fk * d * w**2, rel=1e-12)


def test_expected_state_cases():
    x0 = np.array([0.0, 1.0])
    np.testing.assert_allclose(expected_state(0, x0), x0)
    np.testing.assert_allclose(expected_state(1, x0), [0.5, 0.5])
    x = np.array([0.0, 0.3, 1.0, 2.0])
    far = expected_state(500, x)
    np.testing.assert_allclose(far, np.full(4, x.mean()), atol=1e-10)


def test_expected_state_vector_per_coordinate():
    x0 = np.array([[0.0, 4.0], [2.0, 0.0], [1.0, 2.0]])
    out = expected_state(3, x0)
    for d in range(2):
        np.testing.assert_allclose(out[:, d], expected_state(3, x0[:, d]))


@given(
    st.integers(0, 20),
    st.lists(st.floats(-10, 10), min_size=3, max_size=10),
    st.floats(0.1, 3),
    st.floats(-5, 5),
)
def test_expected_state_affine_equivariance(k, vals, s, t):
    x0 = np.asarray(vals)
    left = expected_state(k, s * x0 + t)
    right = s * expected_state(k, x0) + t
    np.testing.assert_allclose(left, right, rtol=1e-9, atol=1e-9)


# ------------------------------------------------------------ gossip / edsm


def test_gossip_bound_oracle():
    g = gossip_time_bound(10, 0.1, 0.0, 1.0)
    assert g.q == 0.0
    assert g.exact == pytest.approx(GOSSIP_EXACT, rel=1e-12)
    assert g.simplified == pytest.approx(GOSSIP_SIMPL, rel=1e-12)


def test_gossip_q_branches():
    assert gossip_time_bound(10, 0.1, 1.0, 2.0).q == pytest.approx(0.25)
    assert gossip_time_bound(10, 0.1, -2.0, -1.0).q == pytest.approx(0.25)
    assert gossip_time_bound(10, 0.1, -1.0, 3.0).q == 0.0


def test_gossip_validates_epsilon():
    with pytest.raises(ValueError):
        gossip_time_bound(10, 1.5, 0.0, 1.0)


def test_edsm_oracle():
    cv, gos = edsm_bounds(1 / 6, 0.01)
    assert cv == pytest.approx(EDSM_PAIR[0], rel=1e-12)
    assert gos == pytest.approx(EDSM_PAIR[1], rel=1e-12)
    assert cv - gos == pytest.approx(6.0, rel=1e-12)


def test_edsm_limit_eps_to_one():
    cv, gos = edsm_bounds(0.25, 1.0 - 1e-15)
    assert gos == pytest.approx(0.0, abs=1e-12)
    assert cv == pytest.approx(4.0, rel=1e-10)


def test_edsm_links_to_scalar_leading_term():
    # with alpha the contraction deficit, the gossip-style term matches the
    # leading log coefficient of the scalar bound
    n = 11
    alpha = (2 * n + 1) / (3 * n * (n - 1))
    eps = 1e-3
    _, gos = edsm_bounds(alpha, eps)
    lead = -math.log(eps) / -math.log(contraction_factor(n))
    assert gos == pytest.approx(lead, rel=1e-12)


# ------------------------------------------------------------------ circle


def test_t_hd_bound_small_n_exact():
    b4 = t_hd_bound(4)
    assert b4.value == T_HD_4
    assert b4.log10 == pytest.approx(T_HD_4_LOG10, rel=1e-12)
    assert t_hd_bound(5).value == T_HD_5


def test_t_hd_bound_rejects_bad_inputs():
    with pytest.raises(ValueError):
        t_hd_bound(2)
    with pytest.raises(ValueError):
        t_hd_bound(5, delta=1.0)
    with pytest.raises(ValueError):
        t_hd_bound(5, delta=0.0)


def test_t_hd_bound_default_delta_is_optimal():
    n = 6
    best = t_hd_bound(n).log10
    for delta in np.linspace(1e-3, 1 - 1e-3, 999):
        assert best <= t_hd_bound(n, delta=float(delta)).log10 + 1e-12


def test_t_hd_bound_large_n_overflow_marker():
    b = t_hd_bound(400)
    assert math.isinf(b.value)
    assert b.log10 > 300
    # log10 still exact: the dominant term is -floor(N/2)*log10(c_delta)
    m = 200
    c = 4.0 / (27.0 * 400**2 * 399**2)
    assert b.log10 == pytest.approx(-m * math.log10(c), rel=1e-9)


def test_circle_bound_oracle():
    assert t_eps_bound_circle(4, 0.1, b_hd=944788.0) == pytest.approx(
        CIRCLE_BOUND_4, rel=1e-12
    )


def test_circle_bound_decomposition():
    # B_HD = 0 isolates the in-half-disk term; additivity in B_HD
    n, eps = 4, 0.1
    base = t_eps_bound_circle(n, eps, b_hd=0.0)
    assert t_eps_bound_circle(n, eps, b_hd=50.0) == pytest.approx(
        base + 50.0, rel=1e-12
    )
    assert t_eps_bound_circle(n, eps) == pytest.approx(
        t_hd_bound(n).value + base, rel=1e-12
    )


# ------------------------------------------------- Monte Carlo consistency
# (light versions; the acceptance suite runs the full-size ones)


@pytest.mark.slow
def test_lyapunov_decay_monte_carlo():
    from pclab.dynamics import IntervalDomain, init_uniform, step_scalar
    from pclab.observables import lyapunov_scalar

    n, trials = 5, 2000
    ks = (1, 5, 20)
    samples = {k: np.empty(trials) for k in ks}
    for t in range(trials):
        rng = rng_stream(99, t)
        x = init_uniform(rng, IntervalDomain(0.0, 1.0), n)
        step = 0
        for k in sorted(ks):
            while step < k:
                step_scalar(rng, x)
                step += 1
            samples[k][t] = lyapunov_scalar(x)
    for k in ks:
        exact = expected_lyapunov(k, expected_initial_lyapunov_uniform(n, 0, 1), n)
        se = samples[k].std(ddof=1) / math.sqrt(trials)
        assert abs(samples[k].mean() - exact) <= 4 * se
