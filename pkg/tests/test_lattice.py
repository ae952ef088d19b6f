import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latscope.errors import EmptyBody
from latscope.lattice import (Lattice, arithmetic_progression, count_in_dilated_ball,
                              count_in_ellipsoid, dual, enumerate_in_ellipsoid, is_member,
                              lll_reduce, minkowski_bound, preset, shortest_vector,
                              successive_minima)
from latscope.counting import shear_counterexample
from latscope.spectral import Dilation, matrix_power
from oracles import box_count, box_points, random_basis

Z2 = preset("Zn", 2)


def test_enumeration_examples():
    assert count_in_ellipsoid(Z2, np.eye(2), 1.5) == 9
    assert count_in_ellipsoid(Z2, 2 * np.eye(2), 1.5) == 1
    Z1 = preset("Zn", 1)
    assert count_in_dilated_ball(Z1, Dilation([[2.0]]), 3, 1) == 15
    assert count_in_dilated_ball(Z1, Dilation([[2.0]]), -1, 1) == 1


def test_boundary_is_excluded_exactly():
    # |x| < 5 excludes the 12 points with x^2 + y^2 = 25
    assert count_in_ellipsoid(Z2, np.eye(2), 5.0) == box_count(np.eye(2), np.eye(2), 5.0)
    pts = enumerate_in_ellipsoid(Z2, np.eye(2), 5.0)
    assert not np.any(np.isclose(np.sum(pts ** 2, axis=1), 25.0))


def test_random_3d_sets_match_box_scan():
    rng = np.random.default_rng(11)
    for _ in range(15):
        G = random_basis(rng, 3)
        M = random_basis(rng, 3)
        r = rng.uniform(0.5, 4)
        got = enumerate_in_ellipsoid(Lattice(G), M, r)
        want = box_points(G, M, r) @ G.T
        key = lambda P: sorted(map(tuple, np.round(P, 9)))
        assert key(got) == key(want)


def test_shear_lattice_matches_box_scan_deep():
    A, L = shear_counterexample((math.sqrt(5) - 1) / 2)
    for j in (-50, -20, -3):
        M = matrix_power(A, -j)
        assert count_in_dilated_ball(L, A, j, 2) == box_count(L.basis, M, 2)


def test_dual_examples():
    assert np.allclose(dual(Z2).basis, np.eye(2))
    D = dual(Lattice(np.diag([2.0, 1.0])))
    assert np.allclose(D.basis, np.diag([0.5, 1.0]))
    H = preset("hex")
    G = H.basis.T @ dual(H).basis
    assert np.allclose(G, np.round(G), atol=1e-10)


def test_lll_examples():
    L = lll_reduce(Z2)
    assert np.allclose(np.abs(L.basis), np.eye(2))
    L0 = Lattice(np.array([[1.0, 1000.0], [0.0, 1.0]]))
    L1 = lll_reduce(L0)
    n = 2
    assert np.linalg.norm(L1.basis[:, 0]) <= 2 ** ((n - 1) / 4) * L0.covolume ** (1 / n) + 1e-12


def test_lll_round_trip_4d():
    rng = np.random.default_rng(5)
    G = rng.integers(-20, 20, (4, 4)).astype(float)
    while abs(np.linalg.det(G)) < 1:
        G = rng.integers(-20, 20, (4, 4)).astype(float)
    L = Lattice(G)
    R = lll_reduce(L)
    for k in range(4):
        assert is_member(R, G[:, k])
        assert is_member(L, R.basis[:, k])


def test_shortest_vector_examples():
    assert shortest_vector(preset("Zn", 3))[1] == 1
    assert shortest_vector(Lattice(np.diag([2.0, 1.0])))[1] == 1
    v, nrm, count = shortest_vector(preset("hex"))
    assert abs(nrm - 1) < 1e-12 and count == 6
    # brute force over |coeffs| <= 5
    H = preset("hex").basis
    c = np.array([(a, b) for a in range(-5, 6) for b in range(-5, 6) if (a, b) != (0, 0)], dtype=float)
    norms = np.linalg.norm(c @ H.T, axis=1)
    assert int(np.sum(np.abs(norms - norms.min()) < 1e-9)) == 6


def test_successive_minima():
    vals, _ = successive_minima(Z2)
    assert np.allclose(vals, [1, 1])
    vals, _ = successive_minima(Lattice(np.diag([1.0, 5.0])))
    assert np.allclose(vals, [1, 5])
    rng = np.random.default_rng(8)
    for _ in range(10):
        L = Lattice(random_basis(rng, 3))
        vals, wit = successive_minima(L)
        assert np.prod(vals) <= minkowski_bound(L) * (1 + 1e-9)
        assert np.linalg.matrix_rank(wit) == 3


def test_progression_examples():
    rep = arithmetic_progression(preset("Zn", 1), np.eye(1), 10.5)
    assert rep.progression.bounds == [10] and rep.progression.cardinality == 21
    rep = arithmetic_progression(Z2, np.eye(2), 5.5)
    S = rep.progression
    assert S.is_proper()
    assert np.all(np.linalg.norm(S.points(), axis=1) < 5.5)
    with pytest.raises(EmptyBody):
        arithmetic_progression(Z2, np.eye(2), 0.5)


def test_membership_examples():
    assert is_member(Z2, [3, -7])
    assert not is_member(Z2, [0.5, 0])
    H = preset("hex")
    x = 2 * H.basis[:, 0] - 3 * H.basis[:, 1]
    assert is_member(H, x, 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.3, 3.0))
def test_count_invariant_under_unimodular_change(seed, r):
    rng = np.random.default_rng(seed)
    G = random_basis(rng, 2)
    U = np.array([[1, int(rng.integers(-3, 4))], [0, 1]]) @ np.array([[1, 0], [int(rng.integers(-3, 4)), 1]])
    assert count_in_ellipsoid(Lattice(G), np.eye(2), r) == count_in_ellipsoid(Lattice(G @ U), np.eye(2), r)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.2, 3.0), st.floats(0.0, 1.5))
def test_count_monotone_in_radius(seed, r, dr):
    G = random_basis(np.random.default_rng(seed), 2)
    L = Lattice(G)
    assert count_in_ellipsoid(L, np.eye(2), r) <= count_in_ellipsoid(L, np.eye(2), r + dr)
