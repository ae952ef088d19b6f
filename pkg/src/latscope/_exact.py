"""Exact rational matrices: integer numerators over one common denominator.

Every float is a dyadic rational, so float inputs convert without loss; powers,
products and inverses are then exact and only the final answer is rounded.
"""
import math
from fractions import Fraction

import numpy as np

from .errors import IllConditioned, InvalidInput


def _int_array(rows):
    a = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for k, v in enumerate(row):
            a[i, k] = int(v)
    return a


class RatMat:
    __slots__ = ("num", "den")

    def __init__(self, num, den=1):
        self.num = num
        self.den = int(den)
        if self.den < 0:
            self.num = -self.num
            self.den = -self.den
        self._reduce()

    def _reduce(self):
        g = self.den
        for v in self.num.flat:
            g = math.gcd(g, v)
            if g == 1:
                return
        if g > 1:
            self.num = self.num // g
            self.den //= g

    @property
    def shape(self):
        return self.num.shape

    @classmethod
    def from_float(cls, a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if not np.all(np.isfinite(a)):
            raise InvalidInput("matrix entries must be finite")
        fr = [[Fraction(float(v)) for v in row] for row in a]
        return cls.from_fractions(fr)

    @classmethod
    def from_fractions(cls, fr):
        den = 1
        for row in fr:
            for v in row:
                den = den * v.denominator // math.gcd(den, v.denominator)
        num = _int_array([[v.numerator * (den // v.denominator) for v in row] for row in fr])
        return cls(num, den)

    @classmethod
    def identity(cls, n):
        return cls(_int_array(np.eye(n, dtype=int).tolist()), 1)

    def is_integer(self):
        return self.den == 1

    def __matmul__(self, other):
        if isinstance(other, RatMat):
            return RatMat(self.num.dot(other.num), self.den * other.den)
        return NotImplemented

    @property
    def T(self):
        return RatMat(self.num.T.copy(), self.den)

    def to_fractions(self):
        return [[Fraction(v, self.den) for v in row] for row in self.num]

    def inv(self):
        n = self.num.shape[0]
        a = [[Fraction(v) for v in row] + [Fraction(int(i == k)) for k in range(n)]
             for i, row in enumerate(self.num)]
        for c in range(n):
            p = next((i for i in range(c, n) if a[i][c] != 0), None)
            if p is None:
                raise InvalidInput("matrix is singular")
            a[c], a[p] = a[p], a[c]
            pv = a[c][c]
            a[c] = [v / pv for v in a[c]]
            for i in range(n):
                if i != c and a[i][c] != 0:
                    f = a[i][c]
                    a[i] = [x - f * y for x, y in zip(a[i], a[c])]
        # inverse of num/den is den * num^{-1}
        fr = [[v * self.den for v in row[n:]] for row in a]
        return RatMat.from_fractions(fr)

    def power(self, j):
        n = self.num.shape[0]
        if j == 0:
            return RatMat.identity(n)
        base = self if j > 0 else self.inv()
        e = abs(j)
        num, den = None, 1
        bnum, bden = base.num, base.den
        while e:
            if e & 1:
                num = bnum.copy() if num is None else num.dot(bnum)
                den *= bden
            e >>= 1
            if e:
                bnum = bnum.dot(bnum)
                bden *= bden
        return RatMat(num, den)

    def det(self):
        fr = self.to_fractions()
        n = len(fr)
        d = Fraction(1)
        a = [row[:] for row in fr]
        for c in range(n):
            p = next((i for i in range(c, n) if a[i][c] != 0), None)
            if p is None:
                return Fraction(0)
            if p != c:
                a[c], a[p] = a[p], a[c]
                d = -d
            d *= a[c][c]
            for i in range(c + 1, n):
                f = a[i][c] / a[c][c]
                if f:
                    a[i] = [x - f * y for x, y in zip(a[i], a[c])]
        return d

    def to_float(self):
        out = np.empty(self.num.shape)
        try:
            for idx, v in np.ndenumerate(self.num):
                out[idx] = v / self.den
        except OverflowError:
            raise IllConditioned("matrix entries exceed the float range") from None
        return out


def sq_norm_lt(num_vec, den, r):
    """Exact test |num_vec/den|^2 < r^2 for integer num_vec and float r."""
    rf = Fraction(float(r))
    s = sum(int(v) * int(v) for v in num_vec)
    return s * rf.denominator ** 2 < rf.numerator ** 2 * den * den
