"""Norm forms, the diophantine characteristic nu, Haar rotations, seeded experiments."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .counting import BOUNDED, count_profile, lce_verdict
from .errors import ConfluentSpectrum, InvalidInput, LatscopeError, RhoTooSmall, ThetaOutOfRange
from .lattice import COUNT_CAP, Lattice, enumerate_in_ellipsoid, shortest_vector
from .spectral import Dilation, matrix_power


def substream(seed, index):
    """Independent counter-based (Philox) generator for trial `index` of run `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def norm_form(x):
    return np.prod(np.asarray(x, dtype=float), axis=-1)


@dataclass
class NuResult:
    rho: float
    value: float
    witness: np.ndarray
    truncated: bool = True


def _nu_many(L, rhos, cap=COUNT_CAP):
    rhos = [float(r) for r in rhos]
    _, short, _ = shortest_vector(L)
    for r in rhos:
        if not r > short:
            raise RhoTooSmall(f"rho = {r} must exceed the shortest vector length {short:.6g}")
    pts = enumerate_in_ellipsoid(L, np.eye(L.n), max(rhos), cap, sort=False)
    norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    nm = np.abs(np.prod(pts, axis=1))
    out = []
    for r in rhos:
        mask = (norms > 0) & (norms < r)
        idx = np.nonzero(mask)[0]
        i = idx[np.argmin(nm[idx])]
        out.append(NuResult(r, float(nm[i]), pts[i]))
    return out


def nu(L, rho):
    """min |Nm gamma| over lattice points with 0 < |gamma| < rho, with a witness."""
    return _nu_many(L, [rho])[0]


def nu_profile(L, rhos):
    return _nu_many(L, rhos)


def nm_lattice(L, rho_max):
    """Truncated admissibility infimum; the true value is an inf over the whole lattice."""
    res = nu(L, rho_max)
    return {"value": res.value, "witness": res.witness.tolist(), "rho_max": float(rho_max),
            "truncated": True}


def haar_rotation(n, rng):
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@dataclass
class ScanRow:
    rho: float
    nu: float
    threshold: float
    passed: bool
    witness: list


def skriganov_threshold(rho, n, epsilon):
    return math.log(rho) ** (1 - n - epsilon)


def skriganov_scan(L, P, U, rho_list, epsilon):
    """Per rho: does nu(P U Lambda, rho) exceed (log rho)^(1-n-eps)?  Small-rho failures are
    recorded as data; the bound only claims anything as rho grows."""
    if not epsilon > 0:
        raise InvalidInput("epsilon must be positive")
    n = L.n
    T = np.asarray(P, dtype=float) @ np.asarray(U, dtype=float)
    LT = L.transform(T)
    rows = []
    for res in _nu_many(LT, rho_list):
        thr = skriganov_threshold(res.rho, n, epsilon)
        rows.append(ScanRow(res.rho, res.value, thr, bool(res.value > thr), res.witness.tolist()))
    return rows


@dataclass
class ExperimentReport:
    seed: int
    trials: int
    pass_count: int
    diagnostics: list
    thresholds: dict

    @property
    def pass_fraction(self):
        return self.pass_count / self.trials if self.trials else 0.0

    def to_json(self):
        return {"seed": self.seed, "trials": self.trials, "pass_count": self.pass_count,
                "pass_fraction": self.pass_fraction, "thresholds": self.thresholds,
                "diagnostics": self.diagnostics}


def _run_trials(fn, trials, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, range(trials)))
    return [fn(t) for t in range(trials)]


def ubiquity_experiment(A, L, r, trials, j_window, seed, growth_factor=4.0, force_identity=False,
                        workers=1):
    """Per trial: rotate the lattice by a Haar-random U, profile the counts, pass = Bounded."""
    A = A if isinstance(A, Dilation) else Dilation(A)
    j_min, j_max = j_window

    def one(t):
        U = np.eye(L.n) if force_identity else haar_rotation(L.n, substream(seed, t))
        try:
            prof = count_profile(A, L.transform(U), r, j_min, j_max)
            v = lce_verdict(prof, growth_factor)
            return {"trial": t, "passed": v.trend == BOUNDED, "trend": v.trend,
                    "sup_ratio": v.sup_ratio, "witness_j": v.witness_j}
        except LatscopeError as e:
            return {"trial": t, "passed": False, "error": f"{type(e).__name__}: {e}"}

    diags = _run_trials(one, trials, workers)
    return ExperimentReport(int(seed), int(trials), sum(d["passed"] for d in diags), diags,
                            {"r": float(r), "j_window": [int(j_min), int(j_max)],
                             "growth_factor": float(growth_factor)})


def skriganov_experiment(L, rho_list, epsilon, trials, seed, workers=1):
    """Haar-rotated copies of L; a trial passes when every rho passes."""

    def one(t):
        U = haar_rotation(L.n, substream(seed, t))
        rows = skriganov_scan(L, np.eye(L.n), U, rho_list, epsilon)
        return {"trial": t, "passed": all(w.passed for w in rows),
                "nu": [w.nu for w in rows], "per_rho_pass": [w.passed for w in rows]}

    diags = _run_trials(one, trials, workers)
    return ExperimentReport(int(seed), int(trials), sum(d["passed"] for d in diags), diags,
                            {"rho": [float(x) for x in rho_list], "epsilon": float(epsilon),
                             "nu_thresholds": [skriganov_threshold(x, L.n, epsilon) for x in rho_list]})


# ------------------------------------------------------------ Jordan-form growth

def jordan_power_norm_bound(lam, order, j):
    """Triangle-inequality bound on ||J^j|| for a Jordan block (valid for negative j too):
    sum_{m<order} |binom(j, m)| |lam|^(j-m)."""
    a = abs(lam)
    tot = 0.0
    b = 1.0
    for m in range(order):
        if m:
            b *= (j - m + 1) / m
        tot += abs(b) * a ** (j - m)
    return tot


def norm_growth_bound(B, x, j, epsilon):
    """lhs = |Nm(P^{-1} x)| and base = |det B|^(j + |j| eps); rhs = C_fitted * base."""
    B = B if isinstance(B, Dilation) else Dilation(B)
    sd = B.spectral()
    if sd.similarity_basis is None:
        raise ConfluentSpectrum("norm-form bounds need a structured or diagonalizable dilation")
    z = np.linalg.solve(sd.similarity_basis, np.asarray(x, dtype=float))
    lhs = float(abs(norm_form(z)))
    base = B.det_abs ** (j + abs(j) * epsilon)
    return lhs, base


def norm_growth_sweep(B, r, j_range, epsilon, samples=2000, seed=0):
    """C_fitted = max lhs/base over x = B^j y, y uniform in B(0,r), j in the window.
    The same y samples are reused for every j."""
    B = B if isinstance(B, Dilation) else Dilation(B)
    sd = B.spectral()
    if sd.similarity_basis is None:
        raise ConfluentSpectrum("norm-form bounds need a structured or diagonalizable dilation")
    rng = substream(seed, 0)
    n = B.n
    Y = rng.standard_normal((samples, n))
    Y *= (r * rng.random(samples) ** (1 / n) / np.linalg.norm(Y, axis=1))[:, None]
    Pinv = np.linalg.inv(sd.similarity_basis)
    best, arg = 0.0, None
    per_j = {}
    for j in range(j_range[0], j_range[1] + 1):
        X = Y @ matrix_power(B, j).T
        lhs = np.abs(norm_form(X @ Pinv.T))
        val = float(lhs.max()) / B.det_abs ** (j + abs(j) * epsilon)
        per_j[j] = val
        if val > best:
            best, arg = val, j
    return {"C_fitted": best, "argmax_j": arg, "epsilon": epsilon, "r": r, "per_j": per_j}


# ------------------------------------------------------------ sphere measure

@dataclass
class SphereEstimate:
    theta: float
    estimate: float
    stderr: float
    samples: int


def s_p_estimate(P, theta, samples=100000, seed=0):
    """Monte Carlo sigma{x on the unit sphere : |Nm(P x)| < theta}."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    upper = (1 / math.sqrt(n)) * np.linalg.norm(np.linalg.inv(P), 2) ** (-n)
    if not 0 < theta < upper:
        raise ThetaOutOfRange(f"theta must lie in (0, {upper:.6g})")
    rng = substream(seed, 0)
    X = rng.standard_normal((samples, n))
    X /= np.linalg.norm(X, axis=1)[:, None]
    hit = np.abs(norm_form(X @ P.T)) < theta
    p = float(hit.mean())
    return SphereEstimate(float(theta), p, math.sqrt(max(p * (1 - p), 1e-300) / samples), samples)


def s_p_shape_sweep(P, ks=range(2, 11), samples=100000, seed=0):
    """Ratios estimate / [theta (1 + log(1/theta))^(n-2)] along theta = 2^-k."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    out = []
    for k in ks:
        th = 2.0 ** (-k)
        est = s_p_estimate(P, th, samples, seed + k)
        out.append((th, est.estimate / (th * (1 + math.log(1 / th)) ** (n - 2)), est.stderr))
    return out
