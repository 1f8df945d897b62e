"""Properties of the built-in extended class-K functions."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from barriergrasp.barrier import ExtendedClassK

KINDS = ["linear", "cubic", "arctan"]

finite = st.floats(min_value=-50.0, max_value=50.0,
                   allow_nan=False, allow_infinity=False)
gains = st.floats(min_value=1e-3, max_value=10.0,
                  allow_nan=False, allow_infinity=False)


@given(kind=st.sampled_from(KINDS), gain=gains)
def test_zero_at_origin(kind, gain):
    assert ExtendedClassK(kind, gain)(0.0) == 0.0


@given(kind=st.sampled_from(KINDS), gain=gains, s1=finite, s2=finite)
def test_strictly_increasing(kind, gain, s1, s2):
    a = ExtendedClassK(kind, gain)
    lo, hi = min(s1, s2), max(s1, s2)
    if hi - lo > 1e-9:
        assert a(lo) < a(hi)


@given(kind=st.sampled_from(KINDS), gain=gains, s=finite)
def test_odd_symmetry(kind, gain, s):
    a = ExtendedClassK(kind, gain)
    assert a(-s) == pytest.approx(-a(s), abs=1e-12)


@given(kind=st.sampled_from(KINDS), gain=gains,
       s=st.floats(min_value=-10.0, max_value=10.0,
                   allow_nan=False, allow_infinity=False))
def test_derivative_matches_finite_difference(kind, gain, s):
    a = ExtendedClassK(kind, gain)
    eps = 1e-6
    fd = (a(s + eps) - a(s - eps)) / (2 * eps)
    assert float(a.derivative(s)) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_vectorized_evaluation():
    a = ExtendedClassK("cubic", 0.15)
    s = np.array([-2.0, 0.0, 1.5])
    np.testing.assert_allclose(a(s), 0.15 * s**3)
    np.testing.assert_allclose(a.derivative(s), 0.45 * s**2)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        ExtendedClassK("quadratic", 1.0)
    with pytest.raises(ValueError):
        ExtendedClassK("linear", 0.0)
    with pytest.raises(ValueError):
        ExtendedClassK("linear", -1.0)
