from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from eatqkd.entropy_core import (
    Probability,
    binary_entropy,
    binary_entropy_array,
    golden_section_max,
    hoeffding_completeness,
    maximize_scalar,
)

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def test_binary_entropy_special_points():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0


@given(probs)
def test_binary_entropy_symmetric_and_bounded(p):
    q = 1.0 - p
    p = 1.0 - q  # exact complement pair
    h = binary_entropy(p)
    assert 0.0 <= h <= 1.0
    assert h == pytest.approx(binary_entropy(q), rel=1e-13, abs=1e-300)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_binary_entropy_matches_mpmath(p):
    mp.mp.dps = 40
    ref = -(mp.mpf(p) * mp.log(p, 2) + (1 - mp.mpf(p)) * mp.log(1 - mp.mpf(p), 2))
    assert binary_entropy(p) == pytest.approx(float(ref), rel=1e-12, abs=1e-15)


def test_binary_entropy_array_agrees():
    ps = np.linspace(0, 1, 101)
    assert np.allclose(binary_entropy_array(ps), [binary_entropy(p) for p in ps], atol=1e-15)


@pytest.mark.parametrize("bad", [-0.1, 1.1, float("nan")])
def test_probability_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        Probability(bad)
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_hoeffding_value_and_errors():
    assert hoeffding_completeness(10_000, 0.02) == pytest.approx(math.exp(-8.0), rel=1e-14)
    with pytest.raises(ValueError):
        hoeffding_completeness(0, 0.1)
    with pytest.raises(ValueError):
        hoeffding_completeness(10, 0.0)
    with pytest.raises(ValueError):
        hoeffding_completeness(10, 1.0)


def test_hoeffding_monotone_in_n():
    vals = [hoeffding_completeness(n, 0.01) for n in (10, 100, 1000, 10_000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@given(st.floats(min_value=-5, max_value=5))
def test_maximize_scalar_quadratic(c):
    x, y = maximize_scalar(lambda t: -(t - c) ** 2, -10, 10)
    assert x == pytest.approx(c, abs=1e-6)
    assert y == pytest.approx(0.0, abs=1e-10)


def test_maximize_scalar_vectorized_and_kink():
    x, _ = maximize_scalar(lambda t: -np.abs(t - 0.3), 0, 1, vectorized=True)
    assert x == pytest.approx(0.3, abs=1e-8)


def test_maximize_scalar_ignores_nonfinite():
    x, y = maximize_scalar(lambda t: -t if t > 0.5 else math.nan, 0, 1)
    assert x == pytest.approx(0.5, abs=1e-2)
    assert math.isfinite(y)


def test_maximize_scalar_errors():
    with pytest.raises(ValueError):
        maximize_scalar(lambda t: t, 1, 0)
    with pytest.raises(ValueError):
        maximize_scalar(lambda t: math.nan, 0, 1)
    with pytest.raises(ValueError):
        maximize_scalar(lambda t: t, 0, 1, tol=0)


def test_golden_section_unimodal():
    x, y = golden_section_max(lambda t: math.sin(t), 0, 3, tol=1e-12)
    assert x == pytest.approx(math.pi / 2, abs=1e-6)
    assert y == pytest.approx(1.0, abs=1e-12)
