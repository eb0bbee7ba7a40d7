from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eatqkd.chsh import QUANTUM_WIN
from eatqkd.tradeoff import (
    LOG2_9,
    LOG2_13,
    OutcomeFrequency,
    RatePenaltyBreakdown,
    TradeoffContext,
    block_dim_log_term,
    entropy_bound,
    entropy_bound_slope,
    eta,
    eta_opt,
    eta_opt_block,
    expected_block_length,
    f_min,
    g_block,
    g_single,
    second_order_factor,
    tangent_coeffs,
    tested_fraction,
)


mp.mp.dps = 50


def _g_mp(w):
    w = mp.mpf(w)
    x = mp.mpf(1) / 2 + mp.sqrt(16 * w * (w - 1) + 3) / 2
    return 1 + x * mp.log(x, 2) + (1 - x) * mp.log(1 - x, 2)


def test_asymptotic_curve_endpoints():
    assert entropy_bound(0.75) == pytest.approx(0.0, abs=1e-15)
    assert entropy_bound(QUANTUM_WIN) == 1.0
    assert entropy_bound(0.6) == 0.0
    assert entropy_bound(0.9) == 1.0


@given(st.floats(min_value=0.7501, max_value=QUANTUM_WIN - 1e-6))
def test_entropy_bound_matches_mpmath(w):
    assert entropy_bound(w) == pytest.approx(float(_g_mp(w)), abs=1e-12)


@given(st.floats(min_value=0.7505, max_value=QUANTUM_WIN - 1e-4))
def test_slope_matches_mpmath_derivative(w):
    ref = float(mp.diff(_g_mp, w))
    assert entropy_bound_slope(w) == pytest.approx(ref, rel=1e-8)


def test_outcome_frequency_validation():
    f = OutcomeFrequency.from_test_rate(0.4, 0.5)
    f.check_single(0.5)
    with pytest.raises(ValueError):
        f.check_single(0.4)
    with pytest.raises(ValueError):
        OutcomeFrequency(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        OutcomeFrequency(-0.1, 0.6, 0.5)
    g_single(f, 0.5)


def test_context_and_breakdown_validation():
    with pytest.raises(ValueError):
        TradeoffContext(0.0)
    with pytest.raises(ValueError):
        TradeoffContext(0.5, s_max=0)
    with pytest.raises(ValueError):
        TradeoffContext(0.5, dim_log_term=0.0)
    with pytest.raises(ValueError):
        RatePenaltyBreakdown(1.0, -0.1, 0.8)
    assert RatePenaltyBreakdown(1.0, 0.25, 0.8).value == 0.75


def test_g_single_scales_with_gamma():
    assert g_single(0.1 * 0.8, 0.1) == pytest.approx(entropy_bound(0.8), abs=1e-15)


def test_tangent_domain():
    with pytest.raises(ValueError):
        tangent_coeffs(0.75, 1.0)
    with pytest.raises(ValueError):
        tangent_coeffs(QUANTUM_WIN, 1.0)


@settings(max_examples=200)
@given(
    st.floats(min_value=0.01, max_value=1.0),
    st.floats(min_value=0.751, max_value=QUANTUM_WIN - 1e-3),
    st.floats(min_value=0.75, max_value=QUANTUM_WIN),
)
def test_f_min_below_g_and_glued(gamma, wt, w):
    pt, p = gamma * wt, gamma * w
    fm = f_min(p, pt, gamma)
    g = g_single(p, gamma)
    if p <= pt:
        assert fm == g
    else:
        assert fm <= g + 1e-12
        a, b = tangent_coeffs(pt, gamma)
        assert fm == pytest.approx(a * p + b, abs=1e-12)
    a, b = tangent_coeffs(pt, gamma)
    assert a * pt + b == pytest.approx(g_single(pt, gamma), abs=1e-12)


def test_second_order_factor():
    assert second_order_factor(1e8, 1e-6, 1e-6) == pytest.approx(
        2 * math.sqrt(1 - 2 * math.log2(1e-12)) / 1e4)
    with pytest.raises(ValueError):
        second_order_factor(0.5, 1e-6, 1e-6)
    with pytest.raises(ValueError):
        second_order_factor(10, 0.0, 1e-6)


def test_eta_ceil_flag_is_more_conservative():
    plain = eta(0.84, 0.83, 1.0, 1e8, 1e-6, 1e-6)
    ceiled = eta(0.84, 0.83, 1.0, 1e8, 1e-6, 1e-6, ceil_gradient=True)
    assert ceiled.value <= plain.value
    assert ceiled.first_order == plain.first_order


@pytest.mark.parametrize("gamma", [1.0, 0.2, 0.01])
def test_eta_opt_argmax_matches_closed_form(gamma):
    # for an interior optimum the tangent point sits one penalty factor below p
    n, eps = 1e12, 1e-6
    r = eta_opt(0.84, 1e-4, gamma, n, eps, eps)
    p = 0.84 * gamma - 1e-4
    assert r.argmax_pt == pytest.approx(p - second_order_factor(n, eps, eps), abs=1e-7 * gamma)


def test_eta_opt_dominates_fixed_tangent_points():
    r = eta_opt(0.83, 1e-3, 1.0, 1e8, 1e-6, 1e-6)
    for wt in np.linspace(0.752, QUANTUM_WIN - 1e-3, 60):
        assert eta(0.829, wt, 1.0, 1e8, 1e-6, 1e-6).value <= r.value + 1e-12


def test_eta_opt_monotonicity():
    base = dict(omega_exp=0.83, delta_est=1e-3, gamma=0.5, n=1e8, eps_s=1e-6, eps_e=1e-6)
    v = lambda **kw: eta_opt(**{**base, **kw}).value
    assert v(n=1e6) <= v(n=1e8) <= v(n=1e10)
    assert v(eps_s=1e-10) <= v(eps_s=1e-6) <= v(eps_s=1e-3)
    assert v(eps_e=1e-10) <= v(eps_e=1e-6)
    ws = np.linspace(0.76, QUANTUM_WIN, 25)
    vals = [v(omega_exp=float(w)) for w in ws]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_eta_opt_domain_errors():
    with pytest.raises(ValueError):
        eta_opt(0.9, 1e-3, 1.0, 1e8, 1e-6, 1e-6)
    with pytest.raises(ValueError):
        eta_opt(0.8, 0.0, 1.0, 1e8, 1e-6, 1e-6)
    with pytest.raises(ValueError):
        eta_opt(0.8, 1e-3, 0.0, 1e8, 1e-6, 1e-6)


def test_block_helpers():
    assert tested_fraction(0.1, 1) == pytest.approx(0.1)
    assert tested_fraction(1.0, 5) == 1.0
    assert tested_fraction(1e-9, 3) == pytest.approx(3e-9, rel=1e-8)
    assert expected_block_length(0.3, 1) == pytest.approx(1.0)
    assert expected_block_length(0.05, 20) == pytest.approx((1 - 0.95**20) / 0.05)
    for s in range(1, 12):
        assert block_dim_log_term(s) == pytest.approx(math.log2(1 + 2 * 6**s), rel=1e-14)
    assert math.isfinite(block_dim_log_term(5000))
    with pytest.raises(ValueError):
        expected_block_length(0.3, 0)


def test_g_block_reduces_to_g_single():
    assert g_block(0.8 * 0.3, 0.3, 1) == pytest.approx(g_single(0.8 * 0.3, 0.3), abs=1e-15)
    P = tested_fraction(0.1, 7)
    assert g_block(0.82 * P, 0.1, 7) == pytest.approx(P / 0.1 * entropy_bound(0.82), rel=1e-13)
    f = OutcomeFrequency.from_test_rate(0.82 * P, P)
    assert g_block(f, 0.1, 7) == pytest.approx(g_block(0.82 * P, 0.1, 7))
    with pytest.raises(ValueError):
        g_block(OutcomeFrequency.from_test_rate(0.05, 0.1), 0.1, 7)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=1.0),
    st.floats(min_value=0.77, max_value=QUANTUM_WIN),
    st.floats(min_value=4.0, max_value=14.0),
)
def test_block_single_reduction(gamma, omega, logn):
    n = 10.0**logn
    single = eta_opt(omega, 1e-3, gamma, n, 1e-6, 1e-7, TradeoffContext(gamma, 1, LOG2_13))
    block = eta_opt_block(omega, 1e-3, gamma, 1, n, 1e-6, 1e-7, dim_log_term=LOG2_13)
    assert abs(single.value - block.value) <= 1e-12


def test_block_gamma_one_uses_single_round_blocks():
    a = eta_opt_block(0.84, 1e-3, 1.0, 9, 1e8, 1e-6, 1e-6)
    b = eta_opt_block(0.84, 1e-3, 1.0, 1, 1e8, 1e-6, 1e-6)
    assert a.value == b.value


def test_expansion_dimension_constant_helps():
    k13 = eta_opt(0.84, 1e-3, 0.5, 1e8, 1e-6, 1e-6, TradeoffContext(0.5, 1, LOG2_13)).value
    k9 = eta_opt(0.84, 1e-3, 0.5, 1e8, 1e-6, 1e-6, TradeoffContext(0.5, 1, LOG2_9)).value
    assert k9 > k13
