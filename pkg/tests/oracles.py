"""Independent brute-force oracles shared by the tests."""
import itertools
from fractions import Fraction

import numpy as np


def box_points(G, M, r):
    """Integer-box scan for lattice points x = G c with |M x| < r; exact tie-breaking."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    W = M @ G
    n = W.shape[0]
    bound = np.ceil(r * np.linalg.norm(np.linalg.inv(W), axis=1) + 1e-9).astype(int)
    Wf = [[Fraction(float(v)) for v in row] for row in M]
    Gf = [[Fraction(float(v)) for v in row] for row in G]
    rq = Fraction(float(r)) ** 2
    out = []
    ranges = [range(-b, b + 1) for b in bound]
    grid = np.array(list(itertools.product(*ranges)), dtype=float)
    val = np.sum((grid @ W.T) ** 2, axis=1)
    for c, v in zip(grid, val):
        if v < r * r * (1 - 1e-9):
            out.append(c)
        elif v < r * r * (1 + 1e-9):
            ci = [int(t) for t in c]
            x = [sum(Gf[i][k] * ci[k] for k in range(n)) for i in range(n)]
            y = [sum(Wf[i][k] * x[k] for k in range(n)) for i in range(n)]
            if sum(t * t for t in y) < rq:
                out.append(c)
    return np.array(out).reshape(-1, n)


def box_count(G, M, r):
    return len(box_points(G, M, r))


def random_basis(rng, n, cond_max=8.0):
    while True:
        G = rng.uniform(-2, 2, (n, n))
        if np.linalg.cond(G) < cond_max and abs(np.linalg.det(G)) > 0.3:
            return G
