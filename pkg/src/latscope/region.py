"""Implicit regions as predicate trees: exact membership, Monte Carlo measure, tilings.

Conventions: Ball is open, Box is half-open [lo, hi), Ellipsoid {x^T Q x <= level}
is closed, QSet is {|x_E| < p, s < |x_F| < q} with norms of the coordinates in
the (orthonormal within each part) split bases.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ._exact import RatMat
from .errors import EmptyBox, InvalidInput, NoExpansionOnF, SearchBudgetExceeded
from .spectral import Dilation, SubspaceSplit, as_dilation, lyapunov_form, matrix_power, matrix_power_exact

BAND = 1e-9
BLOCK = 1 << 16


def _rows(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1) if x.ndim == 1 else x


def _num(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _unnum(v):
    return float(v)


class Region:
    n: int

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = self._contains(_rows(x))
        return bool(out[0]) if x.ndim == 1 else out

    def margin(self, x):
        return self._margin(_rows(x))

    def bbox(self):
        return None

    def to_json(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Region) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(str(self.to_json()))


class Ball(Region):
    def __init__(self, center, r):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.r = float(r)
        self.n = len(self.center)

    def _contains(self, X):
        return np.sum((X - self.center) ** 2, axis=1) < self.r ** 2

    def _margin(self, X):
        return np.abs(np.linalg.norm(X - self.center, axis=1) - self.r)

    def bbox(self):
        return self.center - self.r, self.center + self.r

    def to_json(self):
        return {"op": "ball", "center": self.center.tolist(), "r": self.r}


class Box(Region):
    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise InvalidInput("box corners differ in dimension")
        self.n = len(self.lo)

    def _contains(self, X):
        return np.all((X >= self.lo) & (X < self.hi), axis=1)

    def _margin(self, X):
        d = np.minimum(np.abs(X - self.lo), np.abs(X - self.hi))
        return d.min(axis=1)

    def bbox(self):
        if np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)):
            return self.lo.copy(), self.hi.copy()
        return None

    @property
    def volume(self):
        return float(np.prod(np.maximum(self.hi - self.lo, 0.0)))

    def to_json(self):
        return {"op": "box", "lo": [_num(v) for v in self.lo], "hi": [_num(v) for v in self.hi]}


class Ellipsoid(Region):
    """{x : (x - c)^T Q (x - c) <= level}."""

    def __init__(self, Q, level=1.0, center=None):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.level = float(level)
        self.n = self.Q.shape[0]
        self.center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        w = np.linalg.eigvalsh(self.Q)
        # semidefinite forms give cylinders
        if w.max() <= 0 or w.min() < -1e-12 * w.max():
            raise InvalidInput("ellipsoid form must be positive semidefinite and nonzero")
        self._lmax = w.max()
        self._lmin = w.min()

    def _q(self, X):
        Y = X - self.center
        return np.einsum("ij,jk,ik->i", Y, self.Q, Y)

    def _contains(self, X):
        return self._q(X) <= self.level

    def _margin(self, X):
        return np.abs(np.sqrt(self._q(X)) - math.sqrt(self.level)) / math.sqrt(self._lmax)

    def bbox(self):
        if self._lmin <= 1e-12 * self._lmax:
            return None
        half = np.sqrt(self.level * np.diag(np.linalg.inv(self.Q)))
        return self.center - half, self.center + half

    def to_json(self):
        return {"op": "ellipsoid", "Q": self.Q.tolist(), "level": self.level,
                "center": self.center.tolist()}


class QSet(Region):
    """{x = x_E + x_F : |x_E| < p, s < |x_F| < q}; p, q may be inf."""

    def __init__(self, split, p, q, s):
        self.split = split
        self.p, self.q, self.s = float(p), float(q), float(s)
        self.n = split.E_basis.shape[0]
        self._W = np.hstack([split.E_basis, split.F_basis])
        self._Winv = np.linalg.inv(self._W)

    def norms(self, X):
        C = X @ self._Winv.T
        k = self.split.dim_E
        return np.linalg.norm(C[:, :k], axis=1), np.linalg.norm(C[:, k:], axis=1)

    def _contains(self, X):
        e, f = self.norms(X)
        return (e < self.p) & (f > self.s) & (f < self.q)

    def _margin(self, X):
        e, f = self.norms(X)
        scale = np.linalg.norm(self._Winv, 2)
        m = np.abs(f - self.s)
        if math.isfinite(self.p):
            m = np.minimum(m, np.abs(e - self.p))
        if math.isfinite(self.q):
            m = np.minimum(m, np.abs(f - self.q))
        return m / scale

    def to_json(self):
        return {"op": "qset", "E_basis": self.split.E_basis.tolist(),
                "F_basis": self.split.F_basis.tolist(), "p": _num(self.p), "q": _num(self.q),
                "s": _num(self.s)}


class LinearImage(Region):
    """M(R) = {M y : y in R}; membership tests R at M^{-1} x."""

    def __init__(self, M, R, Minv=None):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        if Minv is None:
            Minv = RatMat.from_float(self.M).inv().to_float()
        self.Minv = np.atleast_2d(np.asarray(Minv, dtype=float))
        self.R = R
        self.n = self.M.shape[0]
        self._scale = max(np.linalg.norm(self.Minv, 2), 1e-300)

    def _contains(self, X):
        return self.R._contains(X @ self.Minv.T)

    def _margin(self, X):
        return self.R._margin(X @ self.Minv.T) / self._scale

    def bbox(self):
        bb = self.R.bbox()
        if bb is None:
            return None
        lo, hi = bb
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(self.n, -1).T
        img = corners @ self.M.T
        if isinstance(self.R, (Ball, Ellipsoid)) and (isinstance(self.R, Ball) or self.R._lmin > 0):
            # image of an ellipsoid has a closed-form box
            if isinstance(self.R, Ball):
                Qi = np.eye(self.n) * self.R.r ** 2
                c = self.R.center
            else:
                Qi = np.linalg.inv(self.R.Q) * self.R.level
                c = self.R.center
            half = np.sqrt(np.diag(self.M @ Qi @ self.M.T))
            mc = self.M @ c
            return mc - half, mc + half
        return img.min(axis=0), img.max(axis=0)

    def to_json(self):
        return {"op": "image", "M": self.M.tolist(), "Minv": self.Minv.tolist(), "region": self.R.to_json()}


class _Combo(Region):
    op = None

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise InvalidInput(f"{self.op} needs at least one operand")
        self.n = self.parts[0].n
        if any(p.n != self.n for p in self.parts):
            raise InvalidInput("operands differ in dimension")

    def _margin(self, X):
        return np.min([p._margin(X) for p in self.parts], axis=0)

    def to_json(self):
        return {"op": self.op, "parts": [p.to_json() for p in self.parts]}


class Union(_Combo):
    op = "union"

    def _contains(self, X):
        out = np.zeros(len(X), dtype=bool)
        for p in self.parts:
            out |= p._contains(X)
        return out

    def bbox(self):
        bbs = [p.bbox() for p in self.parts]
        if any(b is None for b in bbs):
            return None
        return np.min([b[0] for b in bbs], axis=0), np.max([b[1] for b in bbs], axis=0)


class Intersect(_Combo):
    op = "intersect"

    def _contains(self, X):
        out = np.ones(len(X), dtype=bool)
        for p in self.parts:
            out &= p._contains(X)
        return out

    def bbox(self):
        bbs = [b for b in (p.bbox() for p in self.parts) if b is not None]
        if not bbs:
            return None
        return np.max([b[0] for b in bbs], axis=0), np.min([b[1] for b in bbs], axis=0)


class Diff(_Combo):
    op = "diff"

    def __init__(self, a, b):
        super().__init__([a, b])

    def _contains(self, X):
        return self.parts[0]._contains(X) & ~self.parts[1]._contains(X)

    def bbox(self):
        return self.parts[0].bbox()


def region_from_json(d):
    op = d.get("op")
    if op == "ball":
        return Ball(d["center"], d["r"])
    if op == "box":
        return Box([_unnum(v) for v in d["lo"]], [_unnum(v) for v in d["hi"]])
    if op == "ellipsoid":
        return Ellipsoid(d["Q"], d.get("level", 1.0), d.get("center"))
    if op == "qset":
        E = np.array(d["E_basis"], dtype=float)
        F = np.array(d["F_basis"], dtype=float)
        n = max(E.shape[0] if E.size else 0, F.shape[0] if F.size else 0)
        E = E.reshape(n, -1)
        F = F.reshape(n, -1)
        W = np.hstack([E, F])
        P = W @ np.diag([0.0] * E.shape[1] + [1.0] * F.shape[1]) @ np.linalg.inv(W)
        return QSet(SubspaceSplit(E, F, P), _unnum(d["p"]), _unnum(d["q"]), _unnum(d["s"]))
    if op == "image":
        return LinearImage(d["M"], region_from_json(d["region"]), d.get("Minv"))
    if op == "union":
        return Union([region_from_json(p) for p in d["parts"]])
    if op == "intersect":
        return Intersect([region_from_json(p) for p in d["parts"]])
    if op == "diff":
        a, b = d["parts"]
        return Diff(region_from_json(a), region_from_json(b))
    raise InvalidInput(f"unknown region op {op!r}")


def contains(R, x):
    return R.contains(x)


def linear_image(M, R):
    return LinearImage(M, R)


def dilate(B, j, R):
    """B^j(R) with both powers formed exactly."""
    B = as_dilation(B)
    return LinearImage(matrix_power(B, j), R, matrix_power(B, -j))


# ------------------------------------------------------------------ measure

@dataclass
class MeasureEstimate:
    value: float
    stderr: float
    samples: int
    bbox: tuple
    audit_hits: int = 0

    def to_json(self):
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples,
                "bbox": [list(map(float, self.bbox[0])), list(map(float, self.bbox[1]))],
                "audit_hits": self.audit_hits}


def _substream(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _box_points(lo, hi, m, rng=None, halton=None):
    u = halton.random(m) if halton is not None else rng.random((m, len(lo)))
    return lo + u * (hi - lo)


def measure_mc(R, bbox, n_samples=100000, seed=0, low_discrepancy=False, workers=1, audit=256):
    """Hit fraction times bbox volume. Blocks use independent substreams and are merged in
    order, so results do not depend on `workers`."""
    if isinstance(bbox, Box):
        lo, hi = bbox.lo, bbox.hi
    else:
        lo, hi = (np.asarray(v, dtype=float) for v in bbox)
    vol = float(np.prod(hi - lo))
    if not vol > 0 or not np.isfinite(vol):
        raise EmptyBox("bounding box has no volume")
    n = len(lo)
    n_samples = int(n_samples)
    if low_discrepancy:
        h = qmc.Halton(d=n, scramble=True, seed=np.random.default_rng([int(seed), 0]))
        hits = int(np.sum(R._contains(_box_points(lo, hi, n_samples, halton=h))))
    else:
        sizes = [min(BLOCK, n_samples - s) for s in range(0, n_samples, BLOCK)]

        def block(i):
            return int(np.sum(R._contains(_box_points(lo, hi, sizes[i], _substream(seed, i)))))

        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                hits = sum(ex.map(block, range(len(sizes))))
        else:
            hits = sum(block(i) for i in range(len(sizes)))
    p = hits / n_samples
    stderr = vol * math.sqrt(max(p * (1 - p), 0.0) / n_samples)
    # points just inside the faces of the box should lie outside R
    rng = _substream(seed, 1 << 30)
    face = _box_points(lo, hi, audit * 2 * n, rng)
    for k in range(n):
        face[2 * k * audit:(2 * k + 1) * audit, k] = lo[k] + 1e-12 * (hi[k] - lo[k])
        face[(2 * k + 1) * audit:(2 * k + 2) * audit, k] = hi[k] - 1e-12 * (hi[k] - lo[k])
    audit_hits = int(np.sum(R._contains(face)))
    return MeasureEstimate(p * vol, stderr, n_samples, (lo, hi), audit_hits)


# ------------------------------------------------------------------ tilings

def tiling_annulus(B):
    """S = B(E_Q) minus E_Q, with E_Q the unit ellipsoid of the Lyapunov form of B."""
    B = as_dilation(B)
    Q = lyapunov_form(B)
    EQ = Ellipsoid(Q, 1.0)
    return Diff(dilate(B, 1, EQ), EQ)


def dyadic_annulus():
    return Union([Box([-2.0], [-1.0]), Box([1.0], [2.0])])


def sample_annulus(n, m, r_min, r_max, rng):
    X = rng.standard_normal((m, n))
    X /= np.linalg.norm(X, axis=1)[:, None]
    u = rng.random(m)
    rad = (r_min ** n + u * (r_max ** n - r_min ** n)) ** (1 / n)
    return X * rad[:, None]


def orbit_hits(B, S, X, J, band=BAND):
    """For each row xi: #{j in [-J, J] : B^{-j} xi in S} and whether any orbit point is
    within `band` of a boundary."""
    B = as_dilation(B)
    hits = np.zeros(len(X), dtype=np.int64)
    near = np.zeros(len(X), dtype=bool)
    for j in range(-J, J + 1):
        Y = X @ matrix_power(B, -j).T
        hits += S._contains(Y)
        if band > 0:
            near |= S._margin(Y) < band * np.maximum(1.0, np.linalg.norm(Y, axis=1))
    return hits, near


@dataclass
class TilingReport:
    single_cover_rate: float
    samples: int
    multi_cover_witnesses: list
    uncovered_witnesses: list
    resampled: int

    def to_json(self):
        return dict(self.__dict__)


def tiling_check(B, S, n_samples=10000, J=60, seed=0, r_min=0.1, r_max=10.0, band=BAND,
                 max_rounds=20, sampler=None):
    """Pointwise check that {B^j S} covers each sampled xi exactly once (|j| <= J).
    Samples whose orbit passes within `band` of a boundary are redrawn."""
    B = as_dilation(B)
    rng = _substream(seed, 0)
    draw = sampler or (lambda m, g: sample_annulus(B.n, m, r_min, r_max, g))
    X = draw(n_samples, rng)
    hits, near = orbit_hits(B, S, X, J, band)
    resampled = 0
    rounds = 0
    while near.any() and rounds < max_rounds:
        idx = np.nonzero(near)[0]
        resampled += len(idx)
        X[idx] = draw(len(idx), rng)
        h2, n2 = orbit_hits(B, S, X[idx], J, band)
        hits[idx] = h2
        near[:] = False
        near[idx] = n2
        rounds += 1
    multi = X[hits > 1][:100].tolist()
    unc = X[hits == 0][:100].tolist()
    return TilingReport(float(np.mean(hits == 1)), n_samples, multi, unc, resampled)


@dataclass
class PushReport:
    delta: float
    j: int
    p: float
    q: float
    deficit: float
    deficit_stderr: float
    loss_below_delta: float


def push_tiling_toward_F(S0, B, split, s, eps, bbox=None, n_samples=200000, seed=0, j_budget=4096):
    """Move the part of S0 away from E along the expanding directions.

    delta: the sampled (eps/2)-quantile of |x_F| over S0, so |S0 minus Q(inf,inf,delta)|
    stays below (eps/2)|S0|; j: least j >= 0 with sigma_min(B_F^j) delta >= s, which
    gives B^j Q(inf,inf,delta) inside Q(inf,inf,s). Returns (S_j, PushReport).
    """
    B = as_dilation(B)
    if split.dim_F == 0:
        raise NoExpansionOnF("F is trivial; nothing to push toward")
    bb = bbox or S0.bbox()
    if bb is None:
        raise InvalidInput("push needs a bounded S0 or an explicit bbox")
    lo, hi = (np.asarray(v, dtype=float) for v in bb)
    rng = _substream(seed, 0)
    X = _box_points(lo, hi, n_samples, rng)
    X = X[S0._contains(X)]
    if len(X) == 0:
        raise SearchBudgetExceeded("no samples of S0 inside the bbox")
    q_all = QSet(split, math.inf, math.inf, 0.0)
    _, fnorm = q_all.norms(X)
    delta = float(np.quantile(fnorm, eps / 2 * 0.999, method="lower"))
    if not delta > 0:
        delta = float(fnorm[fnorm > 0].min()) if np.any(fnorm > 0) else 0.0
    if not delta > 0:
        raise SearchBudgetExceeded("S0 has no mass off E in the sample")
    loss = float(np.mean(fnorm <= delta))
    BF = split.F_basis.T @ B.matrix @ split.F_basis
    j = 0
    P = np.eye(split.dim_F)
    while np.linalg.svd(P, compute_uv=False).min() * delta < s:
        j += 1
        if j > j_budget:
            raise SearchBudgetExceeded(f"no j <= {j_budget} pushes delta={delta:.3g} past s={s}")
        P = BF @ P
    Qd = QSet(split, math.inf, math.inf, delta)
    Sj = Union([dilate(B, j, Intersect([S0, Qd])), Diff(S0, Qd)]) if j > 0 else S0
    # fit p, q on samples of S_j and measure the deficit
    bbj = Sj.bbox() or bb
    lo2, hi2 = (np.asarray(v, dtype=float) for v in bbj)
    Y = _box_points(lo2, hi2, n_samples, _substream(seed, 1))
    Y = Y[Sj._contains(Y)]
    e, f = q_all.norms(Y)
    p = float(e.max() * 1.01 + 1e-12)
    q = float(f.max() * 1.01 + 1e-12)
    outside = ~QSet(split, p, q, s)._contains(Y)
    d = float(outside.mean())
    return Sj, PushReport(delta, j, p, q, d, math.sqrt(max(d * (1 - d), 0.0) / len(Y)), loss)
