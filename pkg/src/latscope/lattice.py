"""Full-rank lattices: duals, LLL reduction, exact enumeration in ellipsoids.

Points x = G c (columns of G generate the lattice). Enumeration counts the
integer vectors c with |W c| < r for W = M G, where W is formed exactly from
the dyadic values of the float inputs. A float Fincke-Pohst pass settles every
candidate whose margin to the boundary exceeds a safety band; the few inside
the band are decided in exact integer arithmetic, so the strict inequality is
honoured exactly for the given float data.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._exact import RatMat, sq_norm_lt
from .errors import EmptyBody, IllConditioned, InvalidInput, Overflow

COUNT_CAP = 10 ** 7
T_SLACK = 1e-9   # relative band (in r^2) inside which candidates are decided exactly
C_SLACK = 1e-9   # relative slack on interval centres
LEVEL1_CHUNK = 1 << 16
_EPS = np.finfo(float).eps


class Lattice:
    def __init__(self, basis, tol_det=1e-12, name=None):
        G = np.array(basis, dtype=float)
        if G.ndim == 0:
            G = G.reshape(1, 1)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise InvalidInput("lattice basis must be a square matrix")
        self.exact = RatMat.from_float(G)
        cov = abs(float(self.exact.det()))
        if cov <= tol_det:
            raise InvalidInput(f"lattice basis is degenerate (covolume {cov:.3g})")
        G.setflags(write=False)
        self.basis = G
        self.n = G.shape[0]
        self.covolume = cov
        self.name = name
        self._reduced = None

    @classmethod
    def from_exact(cls, ex, name=None):
        L = cls(ex.to_float(), name=name)
        return L

    def point(self, coeffs):
        return self.basis @ np.asarray(coeffs, dtype=float)

    @property
    def reduced(self):
        if self._reduced is None:
            self._reduced = lll_reduce(self)
        return self._reduced

    def transform(self, M):
        """The lattice M * Gamma."""
        ex = RatMat.from_float(M) @ self.exact
        return Lattice(ex.to_float())

    def to_json(self):
        return {"basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            return preset(d)
        if "preset" in d:
            return preset(d["preset"])
        if "basis" not in d:
            raise InvalidInput("lattice JSON needs 'basis'")
        return cls(d["basis"])

    def __repr__(self):
        return f"Lattice(n={self.n}, covolume={self.covolume:.6g})"


def preset(name, n=2):
    if name == "Zn":
        return Lattice(np.eye(n), name="Zn")
    if name == "hex":
        return Lattice([[1.0, 0.5], [0.0, math.sqrt(3) / 2]], name="hex")
    if name == "sqrt2-norm":
        s = math.sqrt(2)
        return Lattice([[1.0, s], [1.0, -s]], name="sqrt2-norm")
    raise InvalidInput(f"unknown lattice preset {name!r}")


def dual(L):
    """Dual lattice, basis G^{-T} (computed exactly, then rounded)."""
    return Lattice(L.exact.inv().T.to_float())


# ---------------------------------------------------------------- LLL

def _col_float(Wex, U, k):
    v = Wex.num.dot(U[:, k])
    try:
        return np.array([x / Wex.den for x in v], dtype=float)
    except OverflowError:
        raise IllConditioned("basis entries outside the float range") from None


def _r_factor(B):
    R = np.linalg.qr(B, mode="r")
    return R * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))[:, None]


def lll_unimodular(Wex, delta=0.99, max_iter=100000):
    """LLL on the columns of an exact matrix. Returns the integer transform U."""
    if not 0.25 < delta < 1:
        raise InvalidInput("delta must lie in (1/4, 1)")
    n = Wex.shape[1]
    U = np.empty((n, n), dtype=object)
    for i in range(n):
        for k in range(n):
            U[i, k] = int(i == k)
    B = np.column_stack([_col_float(Wex, U, k) for k in range(n)])
    norms = np.linalg.norm(B, axis=0) if np.all(np.isfinite(B)) else np.array([np.inf])
    if not (np.all(norms > 1e-150) and np.all(norms < 1e150)):
        raise IllConditioned("basis columns outside the float range")
    k = 1
    it = 0
    while k < n:
        it += 1
        if it > max_iter:
            raise IllConditioned("LLL did not terminate within the iteration budget")
        # size reduction; exact recompute when large multipliers spoil the float column
        while True:
            R = _r_factor(B[:, :k + 1])
            big = False
            for j in range(k - 1, -1, -1):
                q = round(R[j, k] / R[j, j])
                if q:
                    U[:, k] = U[:, k] - q * U[:, j]
                    B[:, k] -= q * B[:, j]
                    R[:j + 1, k] -= q * R[:j + 1, j]
                    if abs(q) > 2 ** 20:
                        big = True
            if not big:
                break
            B[:, k] = _col_float(Wex, U, k)
        if delta * R[k - 1, k - 1] ** 2 <= R[k, k] ** 2 + R[k - 1, k] ** 2:
            k += 1
        else:
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            k = max(k - 1, 1)
    return U


def lll_reduce(L, delta=0.99):
    """LLL-reduced basis of the same lattice; `.unimodular` holds U with G_red = G U."""
    U = lll_unimodular(L.exact, delta)
    red = Lattice(L.exact.__matmul__(RatMat(U, 1)).to_float())
    red.unimodular = U
    return red


# ---------------------------------------------------------------- enumeration

@dataclass
class _Prepared:
    Vex: RatMat          # exact reduced basis
    U: np.ndarray        # object ints, original coeffs = U @ reduced coeffs
    R: np.ndarray        # float R factor of the reduced basis, positive diagonal
    r: float


def _prepare(Wex, r):
    if not r > 0:
        raise InvalidInput("radius must be positive")
    U = lll_unimodular(Wex)
    Vex = Wex @ RatMat(U, 1)
    V = Vex.to_float()
    if not np.all(np.isfinite(V)):
        raise IllConditioned("reduced basis outside the float range")
    R = _r_factor(V)
    d = np.diag(R)
    if np.any(d <= 0):
        raise IllConditioned("numerically singular basis")
    kappa = np.sum(np.linalg.norm(V, axis=0) / d)
    if _EPS * V.shape[0] * kappa ** 2 > 1e-10:
        raise IllConditioned(f"float enumeration unreliable (basis skew {kappa:.3g})")
    return _Prepared(Vex, U, R, float(r))


def _exact_inside(prep, c):
    v = prep.Vex.num.dot(np.array([int(x) for x in c], dtype=object))
    return sq_norm_lt(v, prep.Vex.den, prep.r)


def _walk(prep, cap, collect):
    """Depth-first over outer coordinates; last two levels vectorised.

    Returns (count, list of reduced coefficient arrays if collect).
    """
    R, r = prep.R, prep.r
    n = R.shape[0]
    r2 = r * r
    tband = T_SLACK * r2
    state = {"count": 0, "work": 0, "chunks": []}

    def inner(prefix_c, S0, absS0, t0):
        # prefix_c: (m, n-1) ints for coords 1..n-1; S0 = sum_k>=1 R0k c_k; t0 residual budget
        R00 = R[0, 0]
        m = -S0 / R00
        d = C_SLACK * (absS0 / R00 + 1.0)
        hA = np.sqrt(np.maximum(t0 + tband, 0.0)) / R00
        hS = np.sqrt(np.maximum(t0 - tband, 0.0)) / R00
        sure = t0 - tband > 0
        lo_s = np.ceil(m - hS + d)
        hi_s = np.floor(m + hS - d)
        n_s = np.where(sure, np.maximum(hi_s - lo_s + 1, 0), 0)
        lo_a = np.ceil(m - hA - d)
        hi_a = np.floor(m + hA + d)
        n_a = np.where(t0 + tband > 0, np.maximum(hi_a - lo_a + 1, 0), 0)
        cnt = int(n_s.sum())
        if state["count"] + cnt > cap:
            raise Overflow(f"more than {cap} lattice points in the body")
        unsure = np.nonzero(n_a > n_s)[0]
        extra = []
        for i in unsure:
            if n_s[i] > 0:
                cands = list(range(int(lo_a[i]), int(lo_s[i]))) + list(range(int(hi_s[i]) + 1, int(hi_a[i]) + 1))
            else:
                cands = range(int(lo_a[i]), int(hi_a[i]) + 1)
            for c0 in cands:
                full = [c0] + [int(v) for v in prefix_c[i]]
                if _exact_inside(prep, full):
                    cnt += 1
                    if collect:
                        extra.append(full)
        if collect:
            rows = np.nonzero(n_s > 0)[0]
            if len(rows):
                lens = n_s[rows].astype(np.int64)
                starts = lo_s[rows].astype(np.int64)
                c0 = np.repeat(starts, lens) + (np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens, lens))
                rest = np.repeat(prefix_c[rows].astype(np.int64), lens, axis=0)
                state["chunks"].append(np.column_stack([c0, rest]))
            if extra:
                state["chunks"].append(np.array(extra, dtype=np.int64))
        state["count"] += cnt
        if state["count"] > cap:
            raise Overflow(f"more than {cap} lattice points in the body")

    if n == 1:
        inner(np.zeros((1, 0), dtype=np.int64), np.zeros(1), np.zeros(1), np.array([r2]))
        return state

    def level1(prefix, t1):
        # prefix: ints for coords 2..n-1
        pre = np.array(prefix, dtype=float)
        S1 = float(R[1, 2:] @ pre) if len(pre) else 0.0
        m1 = -S1 / R[1, 1]
        h1 = math.sqrt(max(t1 * (1 + T_SLACK) + tband, 0.0)) / R[1, 1]
        d1 = C_SLACK * (abs(m1) + h1 + 1.0)
        lo, hi = math.ceil(m1 - h1 - d1), math.floor(m1 + h1 + d1)
        if hi < lo:
            return
        state["work"] += hi - lo + 1
        if state["work"] > cap:
            raise Overflow(f"enumeration work exceeds cap {cap}")
        # chunked so the count cap can stop long rows early
        for a in range(lo, hi + 1, LEVEL1_CHUNK):
            c1 = np.arange(a, min(a + LEVEL1_CHUNK, hi + 1), dtype=np.int64)
            y1 = R[1, 1] * c1 + S1
            t0 = t1 - y1 * y1
            S0 = R[0, 1] * c1 + (float(R[0, 2:] @ pre) if len(pre) else 0.0)
            absS0 = np.abs(R[0, 1] * c1) + (float(np.abs(R[0, 2:]) @ np.abs(pre)) if len(pre) else 0.0)
            prefix_c = np.column_stack([c1] + [np.full(len(c1), p, dtype=np.int64) for p in prefix])
            inner(prefix_c, S0, absS0, t0)

    def rec(i, prefix, t):
        if i == 1:
            level1(prefix, t)
            return
        pre = np.array(prefix, dtype=float)
        S = float(R[i, i + 1:] @ pre) if len(pre) else 0.0
        m = -S / R[i, i]
        h = math.sqrt(max(t * (1 + T_SLACK) + tband, 0.0)) / R[i, i]
        d = C_SLACK * (abs(m) + h + 1.0)
        lo, hi = math.ceil(m - h - d), math.floor(m + h + d)
        state["work"] += max(hi - lo + 1, 0)
        if state["work"] > cap:
            raise Overflow(f"enumeration work exceeds cap {cap}")
        for ci in range(lo, hi + 1):
            y = R[i, i] * ci + S
            rec(i - 1, [ci] + prefix, t - y * y)

    rec(n - 1, [], r2)
    return state


def _count_exact_basis(Wex, r, cap=COUNT_CAP):
    prep = _prepare(Wex, r)
    if np.min(np.linalg.svd(prep.R, compute_uv=False)) > r * (1 + 1e-6):
        return 1
    return _walk(prep, cap, False)["count"]


def _points_exact_basis(Wex, r, cap=COUNT_CAP, sort=True):
    """Original-basis integer coefficients of all c with |W c| < r, sorted."""
    prep = _prepare(Wex, r)
    n = Wex.shape[1]
    cnt = _walk(prep, cap, False)["count"]
    if cnt > cap:
        raise Overflow(f"{cnt} points exceed the cap {cap}")
    st = _walk(prep, cap, True)
    red = np.concatenate(st["chunks"]) if st["chunks"] else np.zeros((0, n), dtype=np.int64)
    U = prep.U
    umax = max(abs(int(v)) for v in U.flat)
    cmax = int(np.abs(red).max()) if red.size else 0
    if umax * max(cmax, 1) * n < 2 ** 62:
        coeffs = red @ U.astype(np.int64).T
    else:
        coeffs = (red.astype(object)).dot(U.T)
    if not sort or not len(coeffs):
        return coeffs
    return coeffs[np.lexsort(tuple(coeffs[:, k] for k in range(n - 1, -1, -1)))]


def _M_exact(M):
    if isinstance(M, RatMat):
        return M
    if hasattr(M, "exact"):
        return M.exact
    return RatMat.from_float(np.atleast_2d(np.asarray(M, dtype=float)))


def enumerate_coeffs(L, M, r, cap=COUNT_CAP, sort=True):
    return _points_exact_basis(_M_exact(M) @ L.exact, r, cap, sort)


def enumerate_in_ellipsoid(L, M, r, cap=COUNT_CAP, sort=True):
    """All lattice points x with |M x| < r, as rows (lexicographic in basis coefficients
    unless sort=False)."""
    coeffs = enumerate_coeffs(L, M, r, cap, sort)
    return np.asarray(coeffs, dtype=float) @ L.basis.T


def count_in_ellipsoid(L, M, r, cap=COUNT_CAP):
    return _count_exact_basis(_M_exact(M) @ L.exact, r, cap)


def count_in_dilated_ball(L, A, j, r, cap=COUNT_CAP):
    """#(Gamma ∩ A^j B(0,r)), i.e. lattice points with |A^{-j} x| < r."""
    from .spectral import matrix_power_exact
    Mj = matrix_power_exact(A, -int(j))
    return _count_exact_basis(Mj @ L.exact, r, cap)


# ---------------------------------------------------------------- SVP & minima

def shortest_vector(L):
    """Exact shortest nonzero vector. Returns (vector, norm, number of minimizers)."""
    red = L.reduced
    r0 = float(np.min(np.linalg.norm(red.basis, axis=0)))
    pts = enumerate_in_ellipsoid(L, np.eye(L.n), r0 * (1 + 1e-7))
    norms = np.linalg.norm(pts, axis=1)
    nz = norms > 0
    pts, norms = pts[nz], norms[nz]
    best = norms.min()
    ties = np.abs(norms - best) <= 1e-12 * best
    i = int(np.argmax(ties))
    return pts[i], float(best), int(ties.sum())


def _greedy_independent(pts, keys, limit):
    wit, vals = [], []
    for i in np.argsort(keys, kind="stable"):
        if keys[i] == 0:
            continue
        cand = wit + [pts[i]]
        if np.linalg.matrix_rank(np.array(cand), tol=1e-9 * max(1.0, np.abs(cand).max())) == len(cand):
            wit.append(pts[i])
            vals.append(float(keys[i]))
            if len(wit) == limit:
                break
    return wit, vals


def successive_minima(L, r_max=None):
    """lambda_1 <= ... <= lambda_n with linearly independent witnesses (rows)."""
    red = L.reduced
    R = float(np.max(np.linalg.norm(red.basis, axis=0))) * (1 + 1e-7)
    if r_max is not None:
        R = min(R, float(r_max))
    pts = enumerate_in_ellipsoid(L, np.eye(L.n), R)
    norms = np.linalg.norm(pts, axis=1)
    wit, vals = _greedy_independent(pts, norms, L.n)
    return np.array(vals), np.array(wit)


def minkowski_bound(L):
    """Upper bound 2^n covol / vol(B^n) for the product of successive minima."""
    n = L.n
    vol_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return 2 ** n * L.covolume / vol_ball


# ---------------------------------------------------------------- progressions

@dataclass
class SymAP:
    generators: np.ndarray  # rows
    bounds: list

    @property
    def rank(self):
        return len(self.bounds)

    def points(self):
        if not self.bounds:
            return np.zeros((1, self.generators.shape[1]))
        grids = np.meshgrid(*[np.arange(-N, N + 1) for N in self.bounds], indexing="ij")
        coef = np.stack([g.ravel() for g in grids], axis=1)
        return coef @ self.generators

    @property
    def cardinality(self):
        return int(np.prod([2 * N + 1 for N in self.bounds]))

    def is_proper(self, tol=1e-9):
        pts = self.points()
        scale = max(1.0, np.abs(pts).max()) if pts.size else 1.0
        key = np.round(pts / (tol * scale)).astype(np.int64)
        return len(np.unique(key, axis=0)) == len(pts)


@dataclass
class ProgressionReport:
    progression: SymAP
    body_count: int
    ratio: float
    span_dim: int


def arithmetic_progression(L, M, r):
    """Proper symmetric progression inside Omega ∩ Gamma, Omega = M^{-1} B(0,r).

    Generators are greedy independent minima of |M x| over the enumerated
    points; N_i is the largest integer with |M N_i v_i| < r / rank.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    pts = enumerate_in_ellipsoid(L, M, r)
    if len(pts) <= 1:
        raise EmptyBody("Omega ∩ Gamma = {0}")
    body = np.linalg.norm(pts @ M.T, axis=1)
    s = int(np.linalg.matrix_rank(pts, tol=1e-9 * max(1.0, np.abs(pts).max())))
    wit, vals = _greedy_independent(pts, body, s)
    gens, bounds = [], []
    for v, nv in zip(wit, vals):
        N = math.ceil(r / (s * nv)) - 1
        while N > 0 and not N * nv < r / s:
            N -= 1
        if N >= 1:
            gens.append(v)
            bounds.append(N)
    S = SymAP(np.array(gens).reshape(len(gens), L.n), bounds)
    return ProgressionReport(S, len(pts), S.cardinality / len(pts), s)


# ---------------------------------------------------------------- membership

def is_member(L, x, tol=1e-9):
    x = np.asarray(x, dtype=float)
    if L.exact.is_integer() and np.all(x == np.round(x)):
        inv = L.exact.inv()
        v = inv.num.dot(np.array([int(t) for t in x], dtype=object))
        return all(int(t) % inv.den == 0 for t in v)
    c = np.linalg.solve(L.basis, x)
    resid = np.linalg.norm(L.basis @ np.round(c) - x)
    return bool(resid < tol * (1 + np.linalg.norm(x)))
