import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latscope.counting import (BOUNDED, DEPENDS, GROWING_NEG, HOLDS, CountProfile, Row, ball_volume,
                               count_profile, lce_verdict, predict_lce, rotation_counterexample,
                               shear_counterexample, volume_packing_check)
from latscope.errors import InvalidInput, WindowTooSmall
from latscope.lattice import Lattice, count_in_ellipsoid, preset
from latscope.spectral import NOT_EXPANDING_ON_SUBSPACE, Dilation, classify_dilation, matrix_power
from oracles import box_count, random_basis

GOLDEN = (math.sqrt(5) - 1) / 2
Z2 = preset("Zn", 2)


def test_profile_2I_small_window():
    prof = count_profile(Dilation(2 * np.eye(2)), Z2, 1.0, -5, 5)
    c = prof.counts()
    assert all(c[j] == 1 for j in range(-5, 1))
    for j in range(-5, 6):
        assert c[j] == box_count(np.eye(2), matrix_power(2 * np.eye(2), -j), 1.0)
    assert c[5] > 3 * c[4]


def test_row_zero_independent_of_dilation():
    L = Lattice(np.array([[1.0, 0.3], [0.2, 1.1]]))
    want = count_in_ellipsoid(L, np.eye(2), 2.5)
    for A in (2 * np.eye(2), np.diag([2.0, 3.0]), [[1.0, 1.0], [-1.0, 1.0]]):
        assert count_profile(Dilation(A), L, 2.5, 0, 0).counts() == {0: want}


def test_profile_requires_expanding_determinant():
    with pytest.raises(InvalidInput):
        count_profile(Dilation(np.diag([1.0, 0.5])), Z2, 1.0, -2, 2)


def _synthetic(ratios_by_j):
    rows = [Row(j, int(c), float(c)) for j, c in ratios_by_j]
    return CountProfile(None, None, 1.0, rows)


def test_verdict_synthetic_profiles():
    assert lce_verdict(_synthetic([(j, 7) for j in range(-20, 21)])).trend == BOUNDED
    growing = [(j, 1 + abs(j) ** 2 if j < 0 else 3) for j in range(-40, 11)]
    assert lce_verdict(_synthetic(growing)).trend == GROWING_NEG
    with pytest.raises(WindowTooSmall):
        lce_verdict(_synthetic([(j, 1) for j in range(-3, 4)]))


def test_expanding_profiles_are_bounded():
    for A in (2 * np.eye(2), np.diag([2.0, 3.0]), [[1.0, 1.0], [-1.0, 1.0]]):
        v = lce_verdict(count_profile(Dilation(A), Z2, 1.0, -15, 15))
        assert v.trend == BOUNDED and v.sup_ratio <= 20


def test_shear_construction():
    A, L = shear_counterexample(GOLDEN)
    assert classify_dilation(A).kind == NOT_EXPANDING_ON_SUBSPACE
    assert float(A.det_abs) == 2
    # j = 0 row is the plain ball count, whatever alpha is
    for alpha in (GOLDEN, math.sqrt(2) - 1):
        _, L2 = shear_counterexample(alpha)
        assert count_profile(A, L2, 2.0, 0, 0).counts() == {0: box_count(L2.basis, np.eye(3), 2.0)}


def test_shear_rational_alpha_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        shear_counterexample(0.5)
    assert w


def test_rotation_construction():
    A, L = rotation_counterexample(1.0, math.sqrt(2) - 1)
    assert classify_dilation(A).kind == NOT_EXPANDING_ON_SUBSPACE
    blocks = A.spectral().blocks
    assert any(b.is_complex and b.order == 2 for b in blocks)
    A0, _ = rotation_counterexample(0.0, math.sqrt(2) - 1)
    assert classify_dilation(A0).kind == NOT_EXPANDING_ON_SUBSPACE
    assert sorted(b.order for b in A0.spectral().blocks) == [1, 2, 2]


def test_packing_examples():
    rep = volume_packing_check(Z2, np.eye(2), 0.5)
    assert rep.count == 1 and not rep.spanning and abs(rep.lower_bound - math.pi / 16) < 1e-12
    rep = volume_packing_check(Z2, np.eye(2), 10.0)
    assert rep.count == box_count(np.eye(2), np.eye(2), 10.0) == 305
    assert rep.lower_ok and rep.upper_ok


def test_predict_lce():
    assert predict_lce(np.diag([2.0, 3.0])) == HOLDS
    assert predict_lce(np.diag([1.0, 2.0])) == HOLDS
    A, _ = shear_counterexample(GOLDEN)
    assert predict_lce(A) == DEPENDS


def test_similarity_covariance():
    rng = np.random.default_rng(2)
    A = np.diag([2.0, 3.0])
    G = random_basis(rng, 2)
    P = random_basis(rng, 2)
    Pi = np.linalg.inv(P)
    for j in range(-3, 4):
        direct = count_in_ellipsoid(Lattice(G), matrix_power(A, -j), 1.5)
        conj = Pi @ A @ P
        moved = count_in_ellipsoid(Lattice(Pi @ G), P @ matrix_power(conj, -j), 1.5)
        assert direct == moved


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.3, 4.0))
def test_packing_bounds_property(seed, r):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    rep = volume_packing_check(Lattice(random_basis(rng, n)), random_basis(rng, n), r)
    assert rep.lower_ok
    if rep.spanning:
        assert rep.upper_ok


def test_ball_volume():
    assert abs(ball_volume(2, 1.0) - math.pi) < 1e-12
    assert abs(ball_volume(3, 2.0) - 4 / 3 * math.pi * 8) < 1e-9
