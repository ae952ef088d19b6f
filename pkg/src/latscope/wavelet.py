"""Calderón sums, the local integrability functional, characterizing equations, MSF certificates.

Frequency functions are finite sums of coefficients times indicators of regions. For a
wavelet system with dilation A and lattice G, the frequency side uses B = A^T and the
dual lattice G*.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._exact import RatMat
from .errors import (IllConditioned, InvalidInput, NoExpansionOnF, Overflow,
                     SearchBudgetExceeded)
from .lattice import COUNT_CAP, Lattice, count_in_dilated_ball, dual, enumerate_in_ellipsoid
from .region import (BAND, Box, Diff, Ellipsoid, Intersect, LinearImage, QSet, Region,
                     _box_points, _substream, dilate, measure_mc, push_tiling_toward_F,
                     region_from_json, tiling_annulus)
from .spectral import Dilation, SubspaceSplit, as_dilation, ef_split, lyapunov_form, matrix_power

OVERFLOW_SUM = 1e9
DIVERGENCE_FACTOR = 1e3
CAUCHY_TOL = 1e-6


class FreqFunction:
    """psi_hat = sum_i c_i * chi_{R_i}."""

    def __init__(self, terms, disjoint=False):
        self.terms = [(complex(c), R) for c, R in terms]
        self.disjoint = bool(disjoint)
        self.n = self.terms[0][1].n if self.terms else None

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X.reshape(1, -1) if single else X
        out = np.zeros(len(X), dtype=complex)
        for c, R in self.terms:
            out[R._contains(X)] += c
        return out[0] if single else out

    def scaled(self, c):
        return FreqFunction([(c * a, R) for a, R in self.terms], self.disjoint)

    def bbox(self):
        bbs = [R.bbox() for _, R in self.terms]
        if not bbs or any(b is None for b in bbs):
            return None
        return np.min([b[0] for b in bbs], axis=0), np.max([b[1] for b in bbs], axis=0)

    def l2_norm_sq(self, n_samples=200000, seed=0, low_discrepancy=True):
        """(value, stderr). Disjoint supports use sum |c_i|^2 |R_i|; otherwise Monte Carlo
        of |psi_hat|^2 over the common bounding box."""
        if not self.terms:
            return 0.0, 0.0
        if self.disjoint:
            val = err2 = 0.0
            for i, (c, R) in enumerate(self.terms):
                m = measure_mc(R, R.bbox(), n_samples, seed=seed + i, low_discrepancy=low_discrepancy)
                val += abs(c) ** 2 * m.value
                err2 += (abs(c) ** 2 * m.stderr) ** 2
            return val, math.sqrt(err2)
        lo, hi = self.bbox()
        vol = float(np.prod(hi - lo))
        X = _box_points(lo, hi, n_samples, _substream(seed, 0))
        g = np.abs(self(X)) ** 2
        return vol * float(g.mean()), vol * float(g.std()) / math.sqrt(n_samples)

    def to_json(self):
        return {"terms": [{"coeff_re": c.real, "coeff_im": c.imag, "support": R.to_json()}
                          for c, R in self.terms], "disjoint": self.disjoint}

    @classmethod
    def from_json(cls, d):
        return cls([(complex(t["coeff_re"], t.get("coeff_im", 0.0)), region_from_json(t["support"]))
                    for t in d["terms"]], d.get("disjoint", False))


def shannon_msf(dim=1):
    if dim != 1:
        raise InvalidInput("the Shannon set is provided in dimension 1 only")
    return FreqFunction([(1.0, Box([-1.0], [-0.5])), (1.0, Box([0.5], [1.0]))], disjoint=True)


def msf_from_tiling(S):
    return FreqFunction([(1.0, S)], disjoint=True)


def _as_list(Psi):
    return [Psi] if isinstance(Psi, FreqFunction) else list(Psi)


# ------------------------------------------------------------------ Calderón

@dataclass
class CalderonResult:
    sums: np.ndarray          # truncation |j| <= J
    half_sums: np.ndarray     # truncation |j| <= J // 2
    growth: np.ndarray        # sums - half_sums > tol_growth
    J: int

    @property
    def growth_detected(self):
        return bool(self.growth.any())


def _pair_sum(Psi, Phi, B, js, X, alpha=None):
    """sum_l sum_{j in js} psi_l(B^{-j} xi) * conj(phi_l(B^{-j}(xi + alpha)))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y2 = X if alpha is None else X + np.asarray(alpha, dtype=float)
    out = np.zeros(len(X), dtype=complex)
    for j in js:
        Mj = matrix_power(B, -j).T
        Z1 = X @ Mj
        Z2 = Z1 if alpha is None else Y2 @ Mj
        for psi, phi in zip(Psi, Phi):
            out += psi(Z1) * np.conj(phi(Z2))
    return out


def calderon_sum(psi, B, xi_samples, J, tol_growth=1e-12):
    """Per-sample truncated sums of |psi_hat(B^{-j} xi)|^2 over |j| <= J."""
    B = as_dilation(B)
    Psi = _as_list(psi)
    X = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    h = J // 2
    inner = _pair_sum(Psi, Psi, B, range(-h, h + 1), X).real
    outer = _pair_sum(Psi, Psi, B, [j for j in range(-J, J + 1) if abs(j) > h], X).real
    full = inner + outer
    return CalderonResult(full, inner, full - inner > tol_growth, J)


def calderon_bound_check(Psi, B, xi_samples, J, C, tol=1e-12):
    """Indices and values of samples whose truncated Calderón sum exceeds C + tol."""
    res = calderon_sum(Psi, B, xi_samples, J)
    bad = np.nonzero(res.sums > C + tol)[0]
    return [(int(i), float(res.sums[i])) for i in bad]


# ------------------------------------------------------------------ characterizing equations

@dataclass
class MemberLog:
    j: int
    exact: bool
    residual: float


def _dual_coeffs(Gd, alpha, tol):
    a = np.asarray(alpha, dtype=float)
    c = np.linalg.solve(Gd.basis, a)
    ci = np.round(c)
    if np.linalg.norm(Gd.basis @ ci - a) > tol * (1 + np.linalg.norm(a)):
        raise InvalidInput(f"alpha={a.tolist()} is not a point of the dual lattice")
    return [int(t) for t in ci]


def member_exponents(B, Gd, alpha, J, tol_mem=1e-9):
    """All j in [-J, J] with B^{-j} alpha in Gd, each with how it was decided.

    The test is on the coefficient map Gd^{-1} B^{-j} Gd, formed exactly; integral
    images are exact members. Otherwise a rounded float image within tol_mem of a
    nonzero integer vector is accepted and its residual kept for audit.
    """
    B = as_dilation(B)
    c = _dual_coeffs(Gd, alpha, tol_mem)
    if not any(c):
        return [MemberLog(j, True, 0.0) for j in range(-J, J + 1)]
    cv = np.array(c, dtype=object)
    Ginv = Gd.exact.inv()
    out = []
    for j in range(-J, J + 1):
        N = Ginv @ B.exact.power(-j) @ Gd.exact
        v = N.num.dot(cv)
        if all(int(t) % N.den == 0 for t in v):
            out.append(MemberLog(j, True, 0.0))
            continue
        try:
            y = np.array([float(int(t)) / N.den if abs(int(t)) < 1 << 1000 else int(t) / N.den for t in v])
        except OverflowError:
            continue
        yr = np.round(y)
        res = float(np.max(np.abs(y - yr)))
        if np.any(yr != 0) and res < tol_mem * (1 + np.linalg.norm(y)):
            out.append(MemberLog(j, False, res))
    return out


@dataclass
class CharEqReport:
    alphas: list
    values: np.ndarray                        # shape (len(alphas), samples), complex
    residuals: list                           # max over samples per alpha
    members: dict = field(default_factory=dict)

    def to_json(self):
        return {"alphas": [list(map(float, a)) for a in self.alphas],
                "residuals": self.residuals,
                "members": {str(k): [m.__dict__ for m in v] for k, v in self.members.items()}}


def dual_eq_residual(Psi, Phi, A, G, alphas, xi_samples, J, tol_mem=1e-9):
    """t_alpha(xi) = sum_l sum_{j: B^{-j} alpha in G*} psi_l(B^{-j} xi) conj(phi_l(B^{-j}(xi+alpha)))
    with B = A^T. Residual |t_0 - 1| at alpha = 0 and |t_alpha| otherwise."""
    A = as_dilation(A)
    B = A.transpose()
    Gd = dual(G)
    Psi, Phi = _as_list(Psi), _as_list(Phi)
    X = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    vals, res, mem = [], [], {}
    for k, a in enumerate(alphas):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        logs = member_exponents(B, Gd, a, J, tol_mem)
        mem[k] = logs
        zero = not np.any(a)
        t = _pair_sum(Psi, Phi, B, [m.j for m in logs], X, None if zero else a)
        vals.append(t)
        res.append(float(np.max(np.abs(t - 1.0))) if zero else float(np.max(np.abs(t))))
    return CharEqReport([np.atleast_1d(np.asarray(a, dtype=float)) for a in alphas], np.array(vals), res, mem)


def char_eq_residual(Psi, A, G, alphas, xi_samples, J, tol_mem=1e-9):
    return dual_eq_residual(Psi, Psi, A, G, alphas, xi_samples, J, tol_mem)


# ------------------------------------------------------------------ MSF certificates

@dataclass
class MSFCertificate:
    r: float
    exponents: list
    sides: dict
    skipped: list

    @property
    def found(self):
        return bool(self.exponents)

    def to_json(self):
        return dict(self.__dict__)


def msf_certificate(B, Gdual, r, j_range):
    """Exponents j with Gdual intersected with B^j(B(0,r)) equal to {0}."""
    B = as_dilation(B)
    ok, skipped = [], []
    for j in j_range:
        try:
            if count_in_dilated_ball(Gdual, B, j, r) == 1:
                ok.append(int(j))
        except IllConditioned:
            skipped.append(int(j))
    sides = {"neg": [j for j in ok if j < 0], "pos": [j for j in ok if j >= 0]}
    return MSFCertificate(float(r), ok, sides, skipped)


# ------------------------------------------------------------------ LIC functional

@dataclass
class TestFunction:
    """f_hat = sup_norm * chi_T with the closure of T away from E."""
    support: Region
    split: SubspaceSplit = None
    sup_norm: float = 1.0
    min_F_norm: float = None   # lower bound on |P x| over T, when known

    __test__ = False

    def __call__(self, X):
        return self.sup_norm * self.support._contains(np.atleast_2d(X)).astype(float)

    def check_off_E(self, n_samples=20000, seed=0):
        """Smallest |x_F| seen over samples of T (must be positive)."""
        lo, hi = self.support.bbox()
        X = _box_points(lo, hi, n_samples, _substream(seed, 7))
        X = X[self.support._contains(X)]
        if self.split is None or self.split.dim_E == 0:
            return float(np.linalg.norm(X, axis=1).min())
        _, f = QSet(self.split, math.inf, math.inf, 0.0).norms(X)
        return float(f.min())


@dataclass
class LICReport:
    checkpoints: list
    partial_sums: list
    stderrs: list
    per_j: dict
    K_orbit: int
    samples_in_support: int
    diagnosis: str
    overflow: bool = False

    def to_json(self):
        d = dict(self.__dict__)
        d["per_j"] = {str(k): v for k, v in self.per_j.items()}
        return d


def lic_functional(Psi, A, G, f, J, K_lat=COUNT_CAP, n_samples=100000, seed=0, chunk=4_000_000):
    """Monte Carlo estimate of
        L(f) = sum_l sum_{|j|<=J} sum_{k in G*} int_T |f(xi + B^j k)|^2 |psi_l(B^{-j} xi)|^2 dxi
    with B = A^T. Only k with |B^j k| below the diameter of the support bounding box can
    contribute; more than K_lat such k for one j raises Overflow."""
    A = as_dilation(A)
    B = A.transpose()
    Gd = dual(G)
    Psi = _as_list(Psi)
    T = f.support
    lo, hi = T.bbox()
    vol = float(np.prod(hi - lo))
    diam = float(np.linalg.norm(hi - lo))
    X = _box_points(lo, hi, int(n_samples), _substream(seed, 0))
    inT = T._contains(X)
    Xt = X[inT]
    fx = f(Xt) ** 2
    checkpoints = sorted({max(J // 4, 0), max(J // 2, 0), J})
    acc = {c: np.zeros(len(Xt)) for c in checkpoints}
    per_j = {}
    orbit = np.zeros(len(Xt), dtype=np.int64)
    overflow = False
    for j in sorted(range(-J, J + 1), key=lambda t: (abs(t), t)):
        Bj = matrix_power(B, j)
        orbit += T._contains(Xt @ matrix_power(B, -j).T)
        g = np.zeros(len(Xt))
        Z = Xt @ matrix_power(B, -j).T
        for psi in Psi:
            g += np.abs(psi(Z)) ** 2
        nz = np.nonzero(g)[0]
        if len(nz) == 0:
            continue
        K = enumerate_in_ellipsoid(Gd, Bj, diam * (1 + 1e-9), cap=K_lat, sort=False)
        shifts = K @ Bj.T
        keep = np.all((shifts > (lo - hi) - 1e-12) & (shifts < (hi - lo) + 1e-12), axis=1)
        shifts = shifts[keep]
        cnt = np.zeros(len(nz))
        step = max(1, chunk // max(len(shifts), 1))
        for s0 in range(0, len(nz), step):
            idx = nz[s0:s0 + step]
            Y = (Xt[idx][:, None, :] + shifts[None, :, :]).reshape(-1, Xt.shape[1])
            hit = T._contains(Y).reshape(len(idx), len(shifts))
            w = f(Y).reshape(len(idx), len(shifts)) ** 2 if f.sup_norm != 1.0 else hit
            cnt[s0:s0 + len(idx)] = w.sum(axis=1)
        contrib = np.zeros(len(Xt))
        contrib[nz] = g[nz] * cnt * (fx[nz] > 0)
        per_j[j] = vol * float(contrib.sum()) / len(X)
        for c in checkpoints:
            if abs(j) <= c:
                acc[c] += contrib
        if vol * acc[J].sum() / len(X) > OVERFLOW_SUM:
            overflow = True
            break
    sums = [vol * float(acc[c].sum()) / len(X) for c in checkpoints]
    errs = []
    for c in checkpoints:
        h = np.zeros(len(X))
        h[inT] = acc[c]
        errs.append(vol * float(h.std()) / math.sqrt(len(X)))
    diagnosis = _diagnose(sums)
    rep = LICReport(checkpoints, sums, errs, per_j, int(orbit.max()) if len(orbit) else 0,
                    int(inT.sum()), "divergence evidence" if overflow else diagnosis, overflow)
    if overflow:
        err = Overflow(f"L(f) partial sum exceeds {OVERFLOW_SUM:g}")
        err.report = rep
        raise err
    return rep


def _diagnose(sums):
    if len(sums) >= 2 and abs(sums[-1] - sums[-2]) < CAUCHY_TOL:
        return "converged"
    if sums[-1] > DIVERGENCE_FACTOR * sums[0]:
        return "divergence evidence"
    return "inconclusive"


# ------------------------------------------------------------------ LIC counterexample

@dataclass
class LICCounterexampleSpec:
    side: str
    js: list
    v: list
    w: list
    r: float
    I: int
    S: Region
    s: float
    push: object = None

    @property
    def calderon_bound(self):
        return float(sum(1.0 / v for v in self.v))

    def to_json(self):
        return {"side": self.side, "js": self.js, "v": self.v, "w": self.w, "r": self.r,
                "I": self.I, "s": self.s, "calderon_bound": self.calderon_bound,
                "push": None if self.push is None else self.push.__dict__}


def _side_exponents(side, budget):
    if side == "a":
        return range(-1, -budget - 1, -1)
    if side == "b":
        return range(0, budget)
    raise InvalidInput("side must be 'a' (j < 0) or 'b' (j >= 0)")


def select_exponents(B, Gdual, r, side, I, budget=2000):
    """Greedy j_1, j_2, ... on one side with the selection quantity >= 2^i.

    v_j = #(B^j Gdual in B(0,r)), w_j = v_j |det B|^j. Side a selects on w (so that
    sum 1/w converges), side b on v (so that sum 1/v converges)."""
    B = as_dilation(B)
    js, vs, ws = [], [], []
    i = 1
    for j in _side_exponents(side, budget):
        try:
            v = count_in_dilated_ball(Gdual, B, -j, r)
        except (Overflow, IllConditioned) as e:
            raise SearchBudgetExceeded(f"side {side} search stopped at j={j}: {e}") from None
        w = v * float(B.det_abs) ** j
        if (w if side == "a" else v) >= 2 ** i:
            js.append(j)
            vs.append(int(v))
            ws.append(float(w))
            i += 1
            if i > I:
                return js, vs, ws
    raise SearchBudgetExceeded(f"only {len(js)} of {I} exponents found on side {side} within |j| < {budget}")


def packing_set(B, split, half=False, e_size=1.0):
    """A set whose B-dilates are pairwise disjoint: in split coordinates, a cube in E
    times the Lyapunov annulus of B restricted to F. `half` keeps only the part with
    positive first F coordinate."""
    B = as_dilation(B)
    k = split.dim_E
    W = np.hstack([split.E_basis, split.F_basis])
    BF = split.F_basis.T @ B.matrix @ split.F_basis
    QF = lyapunov_form(BF)
    BFi = np.linalg.inv(BF)
    QF1 = BFi.T @ QF @ BFi
    n = B.n

    def cyl(Qf):
        Q = np.zeros((n, n))
        Q[k:, k:] = Qf
        return Ellipsoid(Q, 1.0)

    hF = np.sqrt(np.diag(np.linalg.inv(QF1)))
    lo = np.concatenate([-e_size * np.ones(k), -hF])
    hi = np.concatenate([e_size * np.ones(k), hF])
    if half:
        lo[k] = 0.0
    coords = Intersect([Box(lo, hi), Diff(cyl(QF1), cyl(QF))])
    return LinearImage(W, coords)


def lic_counterexample_psi(B, Gdual, r, side, I, S0=None, s=None, eps=0.1, budget=2000,
                           n_samples=100000, seed=0, half=True):
    """psi_hat = sum_i v_{j_i}^{-1/2} chi_{B^{-j_i}(S)} with j_i from `select_exponents`, and
    the companion test function f_hat = chi_T with T a superset of (S cap Q(p,q,s)) + B(0,r)
    whose closure avoids E.

    Both sides use support B^{-j_i}(S) and coefficient v_{j_i}^{-1/2}: at j = j_i the
    v_{j_i} translates each carry weight 1/v_{j_i}, so every term adds about |S cap Q| to
    L(f), while the Calderón sum is sum 1/v_{j_i} and the norm is |S| sum 1/w_{j_i}.
    """
    B = as_dilation(B)
    split = ef_split(B)
    if split.dim_F == 0:
        raise NoExpansionOnF("B has no expanding directions")
    js, vs, ws = select_exponents(B, Gdual, r, side, I, budget)
    Pn = float(np.linalg.norm(split.projection_P, 2))
    s = 1.25 * Pn * r if s is None else float(s)
    if not s > Pn * r:
        raise InvalidInput("s must exceed ||P|| r")
    if S0 is None:
        S0 = packing_set(B, split, half=half)
    S, rep = push_tiling_toward_F(S0, B, split, s, eps, n_samples=n_samples, seed=seed)
    terms = [(1.0 / math.sqrt(v), dilate(B, -j, S)) for j, v in zip(js, vs)]
    psi = FreqFunction(terms, disjoint=True)
    SQ = Intersect([S, QSet(split, rep.p, rep.q, s)])
    blo, bhi = SQ.bbox() or S.bbox()
    T = Intersect([Box(blo - r, bhi + r), QSet(split, math.inf, math.inf, s - Pn * r)])
    spec = LICCounterexampleSpec(side, js, vs, ws, float(r), int(I), S, s, rep)
    return psi, spec, TestFunction(T, split, 1.0, s - Pn * r)
