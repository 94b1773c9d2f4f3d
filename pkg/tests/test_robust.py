import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthground import HuberParams, huber_cost, huber_irls_weight

finite = st.floats(-1e3, 1e3, allow_nan=False)
deltas = st.floats(1e-4, 1.0)


@pytest.mark.parametrize(
    "r,delta,expected", [(0.0, 0.002, 0.0), (0.002, 0.002, 2e-6), (0.01, 0.002, 1.8e-5)]
)
def test_huber_cost_examples(r, delta, expected):
    assert huber_cost(r, delta) == pytest.approx(expected, rel=1e-12, abs=1e-18)


@pytest.mark.parametrize("r,delta,expected", [(0.001, 0.002, 1.0), (0.004, 0.002, 0.5), (-0.02, 0.01, 0.5)])
def test_irls_weight_examples(r, delta, expected):
    assert huber_irls_weight(r, delta) == pytest.approx(expected, rel=1e-12)


def test_vectorized_matches_scalar():
    r = np.linspace(-0.05, 0.05, 41)
    vec = huber_cost(r, 0.01)
    assert np.allclose(vec, [huber_cost(float(x), 0.01) for x in r], rtol=0, atol=0)


def test_params_validation():
    assert HuberParams() == HuberParams(0.002, 0.01)
    with pytest.raises(ValueError):
        HuberParams(0.0, 0.01)


@given(delta=deltas)
def test_continuity_at_threshold(delta):
    eps = 1e-9
    assert abs(huber_cost(delta + eps, delta) - huber_cost(delta - eps, delta)) < 1e-12 + 2 * delta * eps


@given(delta=deltas)
def test_derivative_continuity_at_threshold(delta):
    h = 1e-7 * delta
    left = (huber_cost(delta, delta) - huber_cost(delta - h, delta)) / h
    right = (huber_cost(delta + h, delta) - huber_cost(delta, delta)) / h
    assert abs(left - delta) < 1e-6
    assert abs(right - delta) < 1e-6


@given(a=finite, b=finite, delta=deltas)
def test_monotone_in_abs_residual(a, b, delta):
    lo, hi = sorted((abs(a), abs(b)))
    assert huber_cost(lo, delta) <= huber_cost(hi, delta)
    assert huber_cost(-hi, delta) == huber_cost(hi, delta)


@given(r=finite, delta=deltas)
def test_weight_bounds(r, delta):
    w = huber_irls_weight(r, delta)
    assert 0 < w <= 1


@given(r=finite, delta=deltas)
def test_weight_times_residual_is_cost_derivative(r, delta):
    # w(r) * r == rho'(r): the weighted quadratic is tangent to the Huber cost at r
    deriv = r if abs(r) <= delta else delta * np.sign(r)
    assert huber_irls_weight(r, delta) * r == pytest.approx(deriv, rel=1e-12, abs=1e-300)
