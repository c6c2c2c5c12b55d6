import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqlab.formal import FormalSeries, series_add, series_invert, series_mul

coef = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
series = st.builds(
    lambda lo, cs: FormalSeries.from_coefficients(cs, lo),
    st.integers(-2, 1),
    st.lists(coef, min_size=3, max_size=3),
)


def close(a, b, tol=1e-9):
    top = min(a.truncation_order, b.truncation_order)
    lo = min(a.lowest_power, b.lowest_power)
    return all(abs(a[k] - b[k]) <= tol * (1 + abs(a[k]) + abs(b[k])) for k in range(lo, top + 1))


def test_constructor_rejects_wrong_length():
    with pytest.raises(ValueError):
        FormalSeries(0, (1.0, 2.0), 3)


def test_mixed_spaces_rejected():
    with pytest.raises(ValueError):
        FormalSeries(0, (np.zeros(3), np.zeros(4)), 1)


def test_getitem_below_and_above():
    s = FormalSeries.from_coefficients([1.0, 2.0], lowest_power=1)
    assert s[0] == 0 and s[2] == 2.0
    with pytest.raises(IndexError):
        s[3]


@given(series, series)
def test_add_commutes(a, b):
    assert close(a + b, b + a)


@given(series, series, series)
def test_mul_associative(a, b, c):
    assert close((a * b) * c, a * (b * c), 1e-8)


@given(series, series, series)
def test_distributive(a, b, c):
    assert close(a * (b + c), a * b + a * c, 1e-8)


@given(series)
def test_inverse(a):
    if abs(a.coefficients[0]) < 1e-2:
        return
    one = a * a.inverse()
    assert one.lowest_power == 0
    assert abs(one[0] - 1.0) < 1e-9
    for k in range(1, one.truncation_order + 1):
        assert abs(one[k]) < 1e-6 * (1 + max(abs(c) for c in a.coefficients)) ** 6


def test_inverse_of_zero_lead():
    with pytest.raises(ZeroDivisionError):
        FormalSeries.from_coefficients([0.0, 1.0]).inverse()


def test_truncation_rule_with_negative_power():
    a = FormalSeries.from_coefficients([1.0, 2.0, 3.0], lowest_power=-1)  # exact through nu^1
    b = FormalSeries.from_coefficients([1.0, 1.0, 1.0])  # exact through nu^2
    p = a * b
    assert p.lowest_power == -1 and p.truncation_order == 1
    assert p[-1] == 1.0 and p[0] == 3.0 and p[1] == 6.0


def test_array_coefficients():
    x = np.linspace(0, 1, 5)
    a = FormalSeries.from_coefficients([x, 2 * x])
    b = FormalSeries.from_coefficients([np.ones(5), x])
    p = series_mul(a, b)
    np.testing.assert_allclose(p[1], 2 * x + x * x)
    np.testing.assert_allclose(series_add(a, b)[0], x + 1)


def test_shift_and_scale():
    a = FormalSeries.from_coefficients([1.0, 2.0]).shift(-1).scale(3.0)
    assert a.lowest_power == -1 and a[0] == 6.0


@settings(max_examples=25)
@given(st.lists(coef, min_size=2, max_size=4))
def test_series_invert_roundtrip(cs):
    cs[0] = 1.0 + abs(cs[0])
    a = FormalSeries.from_coefficients(cs)
    assert close(series_invert(series_invert(a)), a, 1e-7)
