from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latscope._exact import RatMat
from latscope.errors import InvalidInput

small_int_mats = st.lists(st.integers(-3, 3), min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


def test_float_conversion_is_exact():
    a = np.array([[0.1, 1 / 3], [2.0 ** -40, -7.5]])
    R = RatMat.from_float(a)
    fr = R.to_fractions()
    assert fr[0][0] == Fraction(0.1)
    assert np.array_equal(R.to_float(), a)


def test_inverse_and_det():
    R = RatMat.from_float([[2.0, 1.0], [1.0, 1.0]])
    assert (R @ R.inv()).to_fractions() == [[1, 0], [0, 1]]
    assert R.det() == 1


def test_singular_inverse_rejected():
    with pytest.raises(InvalidInput):
        RatMat.from_float([[1.0, 2.0], [2.0, 4.0]]).inv()


@settings(max_examples=60, deadline=None)
@given(small_int_mats, st.integers(-6, 6), st.integers(-6, 6))
def test_power_law(M, a, b):
    R = RatMat.from_float(M)
    if R.det() == 0:
        return
    assert (R.power(a) @ R.power(b)).to_fractions() == R.power(a + b).to_fractions()


def test_shear_powers_are_integer():
    S = RatMat.from_float([[1.0, 1.0], [0.0, 1.0]])
    for j in (-500, -3, 0, 7, 1000):
        assert S.power(j).to_fractions() == [[1, j], [0, 1]]
