"""Count profiles j -> #(Gamma ∩ A^j B(0,r)), boundedness verdicts, counterexamples."""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import IllConditioned, InvalidInput, Overflow, WindowTooSmall
from .lattice import COUNT_CAP, Lattice, count_in_dilated_ball, count_in_ellipsoid, enumerate_in_ellipsoid
from .spectral import Block, Dilation, EXPANDING, EXPANDING_ON_SUBSPACE, classify_dilation

BOUNDED = "Bounded"
GROWING_NEG = "GrowingNegSide"
GROWING_POS = "GrowingPosSide"
MIN_SIDE_ROWS = 8


@dataclass
class Row:
    j: int
    count: int
    ratio: float
    flags: str = ""

    @property
    def usable(self):
        return not self.flags.startswith("skipped")


@dataclass
class CountProfile:
    dilation: Dilation
    lattice: Lattice
    r: float
    rows: list

    def counts(self):
        return {row.j: row.count for row in self.rows}

    def to_csv(self):
        lines = ["j,count,ratio,flags"]
        for row in self.rows:
            lines.append(f"{row.j},{row.count},{row.ratio!r},{row.flags}")
        return "\n".join(lines) + "\n"


def _ratio(count, det_abs, j):
    if j <= 0 or det_abs <= 1:
        return float(count)
    return math.exp(math.log(count) - j * math.log(det_abs))


def _row(A, L, r, j, cap):
    try:
        c = count_in_dilated_ball(L, A, j, r, cap)
        return Row(j, c, _ratio(c, A.det_abs, j))
    except Overflow:
        return Row(j, cap, _ratio(cap, A.det_abs, j), "overflow")
    except IllConditioned:
        return Row(j, 0, 0.0, "skipped:IllConditioned")


def count_profile(A, L, r, j_min, j_max, cap=COUNT_CAP, workers=1):
    A = A if isinstance(A, Dilation) else Dilation(A)
    if not A.det_abs > 1:
        raise InvalidInput("count profiles need |det A| > 1")
    if j_max < j_min:
        raise InvalidInput("empty j window")
    js = range(int(j_min), int(j_max) + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda j: _row(A, L, r, j, cap), js))
    else:
        rows = [_row(A, L, r, j, cap) for j in js]
    return CountProfile(A, L, float(r), rows)


@dataclass
class Verdict:
    sup_ratio: float
    trend: str
    witness_j: int
    window: tuple
    sides: dict = field(default_factory=dict)
    evidence_only: bool = True

    def to_json(self):
        return {"sup_ratio": self.sup_ratio, "trend": self.trend, "witness_j": self.witness_j,
                "window": list(self.window), "sides": self.sides, "evidence_only": True}


def _side_growth(rows, growth_factor):
    """Record-max quartile rule: largest ratio among the rows farthest from j=0
    against the largest among the nearest quartile."""
    rows = sorted(rows, key=lambda w: (abs(w.j), w.j))
    q = max(1, len(rows) // 4)
    first = max(w.ratio for w in rows[:q])
    last = max(w.ratio for w in rows[-q:])
    return last > growth_factor * first, first, last


def lce_verdict(p, growth_factor=4.0):
    rows = [w for w in p.rows if w.usable]
    if not rows:
        raise WindowTooSmall("no usable rows")
    sides = {}
    trend = BOUNDED
    judged = 0
    for name, sel, label in (("neg", lambda w: w.j <= 0, GROWING_NEG), ("pos", lambda w: w.j >= 0, GROWING_POS)):
        side = [w for w in rows if sel(w)]
        if len(side) < MIN_SIDE_ROWS:
            sides[name] = {"rows": len(side), "judged": False}
            continue
        judged += 1
        grow, first, last = _side_growth(side, growth_factor)
        sides[name] = {"rows": len(side), "judged": True, "first_quartile_max": first,
                       "last_quartile_max": last, "growing": bool(grow)}
        if grow and trend == BOUNDED:
            trend = label
    if judged == 0:
        raise WindowTooSmall(f"need at least {MIN_SIDE_ROWS} rows on some side of j = 0")
    best = max(rows, key=lambda w: (w.ratio, -abs(w.j)))
    js = [w.j for w in p.rows]
    return Verdict(best.ratio, trend, best.j, (min(js), max(js)), sides)


def _check_alpha(alpha):
    fr = Fraction(float(alpha)).limit_denominator(10 ** 4)
    if abs(float(fr) - alpha) < 1e-12:
        warnings.warn(f"alpha = {fr} is rational; count growth stalls near |j| ~ {fr.denominator}",
                      stacklevel=3)


def shear_counterexample(alpha, scale=2.0):
    """Unipotent shear on the first two coordinates plus an expanding third one."""
    _check_alpha(alpha)
    A = Dilation([[1, 1, 0], [0, 1, 0], [0, 0, scale]],
                 blocks=[Block(1.0, 2, False), Block(complex(scale), 1, False)], basis=np.eye(3),
                 name="shear")
    L = Lattice([[0, 1, 0], [1, alpha, 0], [0, 0, 1]], name="shear-lattice")
    return A, L


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def rotation_counterexample(theta, alpha, scale=2.0):
    """Rotation-with-Jordan-block in R^4 plus an expanding fifth coordinate.

    Coordinates (x1, x2, y1, y2, z): the lattice is the shear lattice placed on
    (x1, y1) and again on (x2, y2), so theta = 0 gives two copies of the shear case.
    """
    _check_alpha(alpha)
    R = _rot(theta)
    M = np.zeros((5, 5))
    M[:2, :2] = R
    M[2:4, 2:4] = R
    M[:2, 2:4] = np.eye(2)
    M[4, 4] = scale
    lam = complex(math.cos(theta), math.sin(theta))
    if abs(lam.imag) > 1e-15:
        blocks = [Block(lam, 2, True), Block(complex(scale), 1, False)]
        P = np.eye(5)
    else:
        blocks = [Block(lam.real, 2, False), Block(lam.real, 2, False), Block(complex(scale), 1, False)]
        P = np.eye(5)[:, [0, 2, 1, 3, 4]]
    A = Dilation(M, blocks=blocks, basis=P, name="rotation-jordan")
    G = np.zeros((5, 5))
    G[:, 0] = [0, 0, 1, 0, 0]
    G[:, 1] = [1, 0, alpha, 0, 0]
    G[:, 2] = [0, 0, 0, 1, 0]
    G[:, 3] = [0, 1, 0, alpha, 0]
    G[:, 4] = [0, 0, 0, 0, 1]
    return A, Lattice(G, name="rotation-lattice")


def ball_volume(n, r=1.0):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


@dataclass
class PackingReport:
    count: int
    lower_bound: float
    upper_bound: object
    spanning: bool
    lower_ok: bool
    upper_ok: object

    def to_json(self):
        return dict(self.__dict__)


def volume_packing_check(L, M, r, cap=COUNT_CAP):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = L.n
    vol = ball_volume(n, r) / abs(np.linalg.det(M))
    pts = enumerate_in_ellipsoid(L, M, r, cap)
    count = len(pts)
    spanning = bool(np.linalg.matrix_rank(pts, tol=1e-9 * max(1.0, np.abs(pts).max())) == n) if count > 1 else False
    lower = float(vol / (2 ** n * L.covolume))
    upper = float(3 ** n * math.factorial(n) * vol / (2 ** n * L.covolume)) if spanning else None
    return PackingReport(count, lower, upper, spanning, bool(lower <= count),
                         bool(count <= upper) if spanning else None)


HOLDS = "HoldsForAllLattices"
DEPENDS = "LatticeDependent"


def predict_lce(A):
    A = A if isinstance(A, Dilation) else Dilation(A)
    if not A.det_abs > 1:
        raise InvalidInput("prediction needs |det A| > 1")
    kind = classify_dilation(A).kind
    return HOLDS if kind in (EXPANDING, EXPANDING_ON_SUBSPACE) else DEPENDS
