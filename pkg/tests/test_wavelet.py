import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latscope.counting import shear_counterexample
from latscope.errors import InvalidInput, SearchBudgetExceeded
from latscope.lattice import Lattice, dual, preset
from latscope.region import Ball, Box, Union, sample_annulus, tiling_annulus
from latscope.spectral import Dilation
from latscope.wavelet import (FreqFunction, TestFunction, calderon_bound_check, calderon_sum,
                              char_eq_residual, dual_eq_residual, lic_counterexample_psi,
                              lic_functional, member_exponents, msf_certificate, msf_from_tiling,
                              select_exponents, shannon_msf)

GOLDEN = (math.sqrt(5) - 1) / 2
Z1 = preset("Zn", 1)
TWO = Dilation([[2.0]])
XI1 = np.random.default_rng(0).uniform(-5, 5, (1000, 1))


def test_shannon_basics():
    sh = shannon_msf()
    assert sh([0.75]) == 1 and sh([-1.0]) == 1 and sh([1.0]) == 0 and sh([0.25]) == 0
    val, err = sh.l2_norm_sq()
    assert abs(val - 1) < 1e-6
    X = np.random.default_rng(5).uniform(-3.9, 3.9, (10000, 1))
    X = X[np.abs(X[:, 0]) > 0.13]
    assert np.all(calderon_sum(sh, TWO, X, 2).sums == 1.0)


def test_freqfunction_json_and_scaling():
    psi = FreqFunction([(1 + 2j, Box([0.0], [1.0])), (0.5, Ball([3.0], 1.0))])
    psi2 = FreqFunction.from_json(json.loads(json.dumps(psi.to_json())))
    X = np.linspace(-1, 5, 101).reshape(-1, 1)
    assert np.array_equal(psi(X), psi2(X))
    assert np.array_equal(psi.scaled(2)(X), 2 * psi(X))


def test_l2_norm_overlapping_supports():
    psi = FreqFunction([(1.0, Box([0.0], [2.0])), (1.0, Box([1.0], [3.0]))])
    val, err = psi.l2_norm_sq(200000)
    assert abs(val - 6.0) < 4 * err + 1e-9


def test_calderon_tiling_msf_and_divergence():
    B = Dilation(np.diag([2.0, 3.0]))
    psi = msf_from_tiling(tiling_annulus(B))
    X = sample_annulus(2, 10000, 0.1, 10, np.random.default_rng(1))
    res = calderon_sum(psi, B, X, 60)
    assert np.mean(res.sums == 1.0) >= 0.999
    res = calderon_sum(FreqFunction([(1.0, Box([0.0], [1.0]))]), TWO, [[0.3]], 40)
    assert res.growth_detected and res.sums[0] == 42


def test_calderon_bound_check():
    assert calderon_bound_check([shannon_msf()], TWO, XI1, 30, 1.0) == []
    flagged = calderon_bound_check([shannon_msf().scaled(math.sqrt(2))], TWO, XI1, 30, 1.0)
    assert len(flagged) == len(XI1)


def test_char_eq_shannon():
    rep = char_eq_residual(shannon_msf(), TWO, Z1, [0, 1, -1, 2, -2, 3, -3], XI1, 30)
    assert rep.residuals == [0.0] * 7
    js = [m.j for m in rep.members[1]]
    assert js == list(range(-30, 1)) and all(m.exact for m in rep.members[1])


def test_char_eq_alpha_zero_is_calderon():
    psi = shannon_msf()
    rep = char_eq_residual(psi, TWO, Z1, [0], XI1, 30)
    assert np.array_equal(rep.values[0].real, calderon_sum(psi, TWO, XI1, 30).sums)


def test_char_eq_detects_non_frame():
    rep = char_eq_residual(FreqFunction([(1.0, Box([0.0], [1.0]))]), TWO, Z1, [0, 1], XI1, 30)
    assert rep.residuals[0] > 1
    # supports of the two factors never meet at alpha = 1
    assert rep.residuals[1] == 0.0


def test_dual_eq():
    sh = shannon_msf()
    a = char_eq_residual(sh, TWO, Z1, [0, 1, 2], XI1, 30)
    b = dual_eq_residual(sh, sh, TWO, Z1, [0, 1, 2], XI1, 30)
    assert np.array_equal(a.values, b.values)
    c = dual_eq_residual(sh, sh.scaled(0.5), TWO, Z1, [0], XI1, 30)
    on = sh(XI1) != 0
    assert np.all(np.isin(c.values[0], [0.5]))
    perturbed = FreqFunction([(1.0, Box([-1.0], [-0.5])), (1.0, Box([0.5], [1.2]))])
    d = dual_eq_residual(sh, perturbed, TWO, Z1, [1, -1], XI1, 30)
    assert max(d.residuals) > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0))
def test_scaling_covariance(c):
    sh = shannon_msf()
    a = char_eq_residual(sh, TWO, Z1, [0, 1], XI1[:200], 20)
    b = char_eq_residual(sh.scaled(c), TWO, Z1, [0, 1], XI1[:200], 20)
    assert np.allclose(b.values, c * c * a.values, rtol=1e-12, atol=0)


def test_membership_rejects_non_lattice_alpha():
    with pytest.raises(InvalidInput):
        member_exponents(TWO, Z1, [0.5], 5)


def test_membership_float_path_logs_residual():
    G = Lattice([[math.sqrt(2)]])
    logs = member_exponents(Dilation([[2.0]]), G, [math.sqrt(2)], 10)
    assert {m.j for m in logs} == set(range(-10, 1))
    assert all(m.residual < 1e-9 for m in logs)


def test_msf_certificate_examples():
    cert = msf_certificate(TWO, Z1, 1.0, range(-10, 3))
    assert cert.exponents == list(range(-10, 1))
    assert cert.sides["neg"] == list(range(-10, 0))


def test_lic_zero_psi_and_convergent_case():
    A = Dilation(2 * np.eye(2))
    f = TestFunction(Box([1.0, 0.3], [1.2, 0.5]))
    zero = FreqFunction([(0.0, Ball([0, 0], 1.0))])
    assert lic_functional(zero, A, preset("Zn"), f, 10, n_samples=5000).partial_sums[-1] == 0
    rep = lic_functional(msf_from_tiling(tiling_annulus(A)), A, preset("Zn"), f, 30, n_samples=20000)
    assert rep.diagnosis == "converged"
    assert all(a <= b for a, b in zip(rep.partial_sums, rep.partial_sums[1:]))
    assert abs(rep.partial_sums[-1] - 0.04) < 4 * rep.stderrs[-1] + 1e-12


def test_counterexample_selection():
    A, G = shear_counterexample(GOLDEN)
    js, vs, ws = select_exponents(A, G, 2.0, "b", 5)
    assert js == [0, 1, 2, 20, 142] and vs == [29, 13, 9, 23, 39]
    assert all(v >= 2 ** (i + 1) for i, v in enumerate(vs))
    with pytest.raises(SearchBudgetExceeded):
        select_exponents(Dilation(np.diag([2.0, 3.0])), preset("Zn"), 1.0, "b", 5, budget=300)
    with pytest.raises(SearchBudgetExceeded):
        select_exponents(Dilation(np.diag([2.0, 3.0])), preset("Zn"), 1.0, "a", 5, budget=300)


def test_counterexample_psi_calderon_bound():
    A, G = shear_counterexample(GOLDEN)
    psi, spec, f = lic_counterexample_psi(A, G, 2.0, "b", 5, n_samples=40000)
    assert spec.calderon_bound <= 2
    X = sample_annulus(3, 3000, 0.1, 20, np.random.default_rng(2))
    inside = np.vstack([X, (np.random.default_rng(3).uniform(-1, 1, (3000, 3)) + [0, 0, 5])])
    assert calderon_sum(psi, A, inside, 150).sums.max() <= spec.calderon_bound + 1e-12
    assert f.min_F_norm > 0 and f.check_off_E() > 0
