import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latscope.errors import InvalidInput, NotExpanding
from latscope.spectral import (EXPANDING, EXPANDING_ON_SUBSPACE, NOT_EXPANDING_ON_SUBSPACE, Block,
                               Dilation, classify_dilation, ef_split, eigen_decompose,
                               lyapunov_form, matrix_power, real_jordan_matrix)


def rot(t):
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def blockdiag(*bs):
    n = sum(np.atleast_2d(b).shape[0] for b in bs)
    out = np.zeros((n, n))
    k = 0
    for b in bs:
        b = np.atleast_2d(b)
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


SHEAR = [[1.0, 1.0], [0.0, 1.0]]
ROT_JORDAN = np.block([[rot(1.0), np.eye(2)], [np.zeros((2, 2)), rot(1.0)]])

BATTERY = [
    (np.diag([2.0, 3.0]), EXPANDING),
    (2 * np.eye(2), EXPANDING),
    ([[1.0, 1.0], [-1.0, 1.0]], EXPANDING),
    ([[2.0, 1.0], [0.0, 2.0]], EXPANDING),
    (1.5 * rot(0.7), EXPANDING),
    (np.diag([1.0, 2.0]), EXPANDING_ON_SUBSPACE),
    (np.diag([1.0, 1.0, 2.0]), EXPANDING_ON_SUBSPACE),
    (blockdiag(rot(1.0), [[3.0]]), EXPANDING_ON_SUBSPACE),
    (np.diag([-1.0, 2.0]), EXPANDING_ON_SUBSPACE),
    (blockdiag(SHEAR, [[2.0]]), NOT_EXPANDING_ON_SUBSPACE),
    (blockdiag(ROT_JORDAN, [[2.0]]), NOT_EXPANDING_ON_SUBSPACE),
    (np.diag([0.5, 2.0]), NOT_EXPANDING_ON_SUBSPACE),
    (SHEAR, NOT_EXPANDING_ON_SUBSPACE),
    (rot(0.3), NOT_EXPANDING_ON_SUBSPACE),
    (blockdiag(0.9 * rot(1.0), [[3.0]]), NOT_EXPANDING_ON_SUBSPACE),
]


@pytest.mark.parametrize("M,kind", BATTERY)
def test_classification_battery(M, kind):
    assert classify_dilation(M, 1e-9).kind == kind


def test_eigen_decompose_examples():
    sd = eigen_decompose(2 * np.eye(2))
    assert sorted(b.order for b in sd.blocks) == [1, 1]
    sd = eigen_decompose(SHEAR)
    assert [b.order for b in sd.blocks] == [2]
    assert abs(sd.blocks[0].eigenvalue - 1) < 1e-9


def test_rotation_jordan_block():
    sd = eigen_decompose(blockdiag(ROT_JORDAN, [[2.0]]))
    cplx = [b for b in sd.blocks if b.is_complex]
    assert len(cplx) == 1 and cplx[0].order == 2
    assert abs(abs(cplx[0].eigenvalue) - 1) < 1e-6


def test_eigenvalues_against_polynomial_roots():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        sd = eigen_decompose(M)
        roots = np.roots(np.poly(M))
        for lam in sd.eigenvalues:
            assert np.min(np.abs(roots - lam)) < 1e-8


def test_det_matches_eigenvalue_product():
    rng = np.random.default_rng(4)
    for _ in range(20):
        M = rng.normal(size=(3, 3)) * 2
        D = Dilation(M)
        ev = D.spectral().eigenvalues
        assert np.isclose(np.prod(np.abs(ev)), float(D.det_abs), rtol=1e-8)


def test_ef_split_examples():
    sp = ef_split(np.diag([1.0, 2.0]))
    assert sp.dim_E == 1 and sp.dim_F == 1
    assert np.allclose(sp.projection_P, np.diag([0.0, 1.0]))
    sp = ef_split(rot(0.4))
    assert sp.dim_E == 2 and sp.dim_F == 0
    A = blockdiag(0.9 * rot(1.0), [[3.0]])
    sp = ef_split(A)
    assert (sp.dim_E, sp.dim_F) == (2, 1)
    for basis in (sp.E_basis, sp.F_basis):
        img = A @ basis
        coef, *_ = np.linalg.lstsq(basis, img, rcond=None)
        assert np.linalg.norm(basis @ coef - img) < 1e-8 * np.linalg.norm(A)
    P = sp.projection_P
    assert np.allclose(P @ P, P, atol=1e-8)


def test_matrix_power_examples():
    for j in (-200, -1, 0, 3, 200):
        assert np.array_equal(matrix_power(SHEAR, j), [[1, j], [0, 1]])
    assert np.array_equal(matrix_power(np.diag([2.0, 3.0]), -2), np.diag([1 / 4, 1 / 9]))
    assert np.array_equal(matrix_power(np.diag([2.0, 3.0]), 0), np.eye(2))


def test_lyapunov_examples():
    assert np.allclose(lyapunov_form(2 * np.eye(2)), 4 / 3 * np.eye(2))
    assert np.allclose(lyapunov_form(np.diag([2.0, 3.0])), np.diag([4 / 3, 9 / 8]))
    M = np.array([[1.0, 1.0], [-1.0, 1.0]])
    Q = lyapunov_form(M)
    Mi = np.linalg.inv(M)
    assert np.linalg.norm(Mi.T @ Q @ Mi - (Q - np.eye(2))) < 1e-8
    with pytest.raises(NotExpanding):
        lyapunov_form(np.diag([1.0, 2.0]))


def test_singular_dilation_rejected():
    with pytest.raises(InvalidInput):
        Dilation([[1.0, 2.0], [2.0, 4.0]])


def test_structured_spec_and_transpose():
    blocks = [Block(1.0, 2, False), Block(2.0, 1, False)]
    D = Dilation(blockdiag(SHEAR, [[2.0]]), blocks=blocks, basis=np.eye(3))
    assert D.structured
    T = D.transpose()
    assert np.array_equal(T.matrix, D.matrix.T)
    J = real_jordan_matrix(T.blocks)
    P = T.basis
    assert np.allclose(P @ J, T.matrix @ P)
    D2 = Dilation.from_json(D.to_json())
    assert np.array_equal(D2.matrix, D.matrix)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.05, 4), st.floats(1.05, 4), st.floats(-2, 2))
def test_upper_triangular_expanding(a, b, c):
    assert classify_dilation([[a, c], [0.0, b]]).kind == EXPANDING
