"""Spectral classification of dilations, invariant subspace splits, exact powers."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from ._exact import RatMat
from .errors import ConfluentSpectrum, IllConditioned, InvalidInput, NotExpanding

MODULUS_TOL = 1e-9
CLUSTER_TOL = 1e-5
RANK_CUTOFF = 1e-8

EXPANDING = "Expanding"
EXPANDING_ON_SUBSPACE = "ExpandingOnSubspace"
NOT_EXPANDING_ON_SUBSPACE = "NotExpandingOnSubspace"


@dataclass(frozen=True)
class Block:
    eigenvalue: complex
    order: int
    is_complex: bool  # one entry stands for the conjugate pair; occupies 2*order columns


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    blocks: list
    similarity_basis: Optional[np.ndarray] = None
    structured: bool = False

    def multiplicity(self, lam, tol=CLUSTER_TOL):
        return int(np.sum(np.abs(self.eigenvalues - lam) <= tol * max(1.0, abs(lam))))


@dataclass(frozen=True)
class DilationClass:
    kind: str
    det_abs: float


@dataclass
class SubspaceSplit:
    E_basis: np.ndarray  # columns
    F_basis: np.ndarray
    projection_P: np.ndarray  # kernel E, range F

    @property
    def dim_E(self):
        return self.E_basis.shape[1]

    @property
    def dim_F(self):
        return self.F_basis.shape[1]

    def coords(self, x):
        """Coordinates of x (rows) in the basis [E F]; returns (x_E, x_F)."""
        x = np.atleast_2d(x)
        c = np.linalg.solve(np.hstack([self.E_basis, self.F_basis]), x.T).T
        return c[:, :self.dim_E], c[:, self.dim_E:]


def real_jordan_matrix(blocks):
    """Assemble the real Jordan form for a list of Blocks (upper, ones above the diagonal)."""
    size = sum(2 * b.order if b.is_complex else b.order for b in blocks)
    J = np.zeros((size, size))
    pos = 0
    for b in blocks:
        lam = complex(b.eigenvalue)
        if b.is_complex:
            C = np.array([[lam.real, lam.imag], [-lam.imag, lam.real]])
            for i in range(b.order):
                s = pos + 2 * i
                J[s:s + 2, s:s + 2] = C
                if i + 1 < b.order:
                    J[s:s + 2, s + 2:s + 4] = np.eye(2)
            pos += 2 * b.order
        else:
            for i in range(b.order):
                J[pos + i, pos + i] = lam.real
                if i + 1 < b.order:
                    J[pos + i, pos + i + 1] = 1.0
            pos += b.order
    return J


def _transpose_similarity(blocks):
    """S with J^T = S J S^{-1}: reverse each block, conjugating 2x2 parts by diag(1,-1)."""
    size = sum(2 * b.order if b.is_complex else b.order for b in blocks)
    S = np.zeros((size, size))
    pos = 0
    for b in blocks:
        if b.is_complex:
            k = b.order
            for i in range(k):
                src = pos + 2 * i
                dst = pos + 2 * (k - 1 - i)
                S[dst, src] = 1.0
                S[dst + 1, src + 1] = -1.0
            pos += 2 * k
        else:
            k = b.order
            for i in range(k):
                S[pos + k - 1 - i, pos + i] = 1.0
            pos += k
    return S


def _eigs_from_blocks(blocks):
    ev = []
    for b in blocks:
        lam = complex(b.eigenvalue)
        ev += [lam] * b.order
        if b.is_complex:
            ev += [lam.conjugate()] * b.order
    return _sort_desc(np.array(ev, dtype=complex))


def _sort_desc(ev):
    order = np.lexsort((-ev.imag, -ev.real, -np.abs(ev)))
    return ev[order]


def _clusters(ev, ctol):
    """Single-linkage clusters of eigenvalues; returns list of index arrays."""
    n = len(ev)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for k in range(i + 1, n):
            if abs(ev[i] - ev[k]) <= ctol * max(1.0, abs(ev[i]), abs(ev[k])):
                parent[find(i)] = find(k)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def _nullity(X, cutoff):
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.sum(s <= cutoff))


def eigen_decompose(M, tol=MODULUS_TOL, cluster_tol=CLUSTER_TOL):
    """Eigenvalues (modulus descending) and Jordan block orders from rank tests.

    Eigenvalues within `cluster_tol` (relative) are merged and replaced by the
    cluster mean; block orders come from the nullities of (M - mu I)^k.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    raw, vecs = np.linalg.eig(M)
    groups = _clusters(raw, cluster_tol)
    means = []
    for g in groups:
        mu = complex(np.mean(raw[g]))
        if abs(mu.imag) <= cluster_tol * max(1.0, abs(mu)):
            mu = complex(mu.real, 0.0)
        means.append((mu, g))
    ev = np.empty(n, dtype=complex)
    blocks = []
    diagonalizable = True
    for mu, g in means:
        ev[g] = mu
        if mu.imag < 0:
            continue
        m = len(g)
        N = M - mu * np.eye(n)
        scale = max(1.0, np.linalg.norm(N, 2))
        nulls = [0]
        P = np.eye(n, dtype=complex)
        for k in range(1, m + 1):
            P = P @ N
            nulls.append(_nullity(P, RANK_CUTOFF * scale ** k))
            if nulls[-1] == m:
                break
        if nulls[-1] != m:
            raise ConfluentSpectrum(
                f"cannot resolve Jordan structure at eigenvalue {mu:.6g}; supply a structured spec")
        d = np.diff(nulls)
        if np.any(d < 0) or np.any(np.diff(d) > 0):
            raise ConfluentSpectrum(f"inconsistent nullity sequence {nulls} at {mu:.6g}")
        counts_ge = list(d) + [0]
        for k in range(len(counts_ge) - 1, 0, -1):
            exactly = counts_ge[k - 1] - counts_ge[k]
            for _ in range(exactly):
                blocks.append(Block(mu, k, mu.imag != 0))
                if k > 1:
                    diagonalizable = False
    # separated but nearly parallel eigenvectors indicate an unresolved defective cluster
    if diagonalizable and np.linalg.cond(vecs) > 1e8:
        raise ConfluentSpectrum("eigenvector matrix is nearly singular; supply a structured spec")
    basis = None
    if diagonalizable:
        basis = _diagonal_basis(M, means)
        blocks = _blocks_in_basis_order(means)
    order = np.argsort([-abs(b.eigenvalue) for b in blocks], kind="stable")
    if basis is None:
        blocks = [blocks[i] for i in order]
    return SpectralData(_sort_desc(ev), blocks, basis, structured=False)


def _blocks_in_basis_order(means):
    out = []
    for mu, g in means:
        if mu.imag < 0:
            continue
        out += [Block(mu, 1, mu.imag != 0)] * len(g)
    return out


def _diagonal_basis(M, means):
    n = M.shape[0]
    cols = []
    for mu, g in means:
        if mu.imag < 0:
            continue
        m = len(g)
        _, _, vh = np.linalg.svd(M - mu * np.eye(n))
        null = vh[-m:].conj().T
        for i in range(m):
            v = null[:, i]
            if mu.imag == 0:
                v = v.real if np.linalg.norm(v.real) >= np.linalg.norm(v.imag) else v.imag
                cols.append(v / np.linalg.norm(v))
            else:
                cols += [v.real, v.imag]
    return np.column_stack(cols)


class Dilation:
    """Invertible real matrix with cached spectral data.

    `blocks` + `basis` give an exact real Jordan description (structured=True):
    entries == basis @ J @ inv(basis). Complex blocks are listed once per
    conjugate pair (lambda_im > 0) and occupy 2*order columns.
    """

    def __init__(self, entries, blocks=None, basis=None, tol_det=1e-12, name=None):
        M = np.array(entries, dtype=float)
        if M.ndim == 0:
            M = M.reshape(1, 1)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidInput("dilation must be a square matrix")
        if not 1 <= M.shape[0] <= 8:
            raise InvalidInput("dimension must be between 1 and 8")
        self.exact = RatMat.from_float(M)
        self.det = float(self.exact.det())
        if abs(self.det) <= tol_det:
            raise InvalidInput(f"dilation is not invertible (|det| = {abs(self.det):.3g})")
        M.setflags(write=False)
        self.matrix = M
        self.n = M.shape[0]
        self.name = name
        self._spectral = None
        self.blocks = None
        self.basis = None
        if blocks is not None or basis is not None:
            if blocks is None or basis is None:
                raise InvalidInput("structured spec needs both blocks and basis")
            self.blocks = [b if isinstance(b, Block) else Block(
                complex(b["lambda_re"], b.get("lambda_im", 0.0)), int(b["order"]),
                b.get("lambda_im", 0.0) != 0) for b in blocks]
            P = np.array(basis, dtype=float)
            J = real_jordan_matrix(self.blocks)
            if P.shape != M.shape or J.shape != M.shape:
                raise InvalidInput("basis/blocks do not match the dimension")
            resid = np.linalg.norm(P @ J - M @ P) / max(1.0, np.linalg.norm(M) * np.linalg.norm(P))
            if resid > 1e-8:
                raise InvalidInput(f"structured spec inconsistent with entries (residual {resid:.2e})")
            self.basis = P
            self._spectral = SpectralData(_eigs_from_blocks(self.blocks), list(self.blocks), P, True)

    @property
    def det_abs(self):
        return abs(self.det)

    @property
    def structured(self):
        return self.blocks is not None

    def spectral(self, tol=MODULUS_TOL):
        if self._spectral is None:
            self._spectral = eigen_decompose(self.matrix, tol)
        return self._spectral

    def transpose(self):
        if self.structured:
            S = _transpose_similarity(self.blocks)
            Q = np.linalg.inv(self.basis).T @ S
            return Dilation(self.matrix.T, self.blocks, Q)
        return Dilation(self.matrix.T)

    def power(self, j):
        return matrix_power(self, j)

    def to_json(self):
        d = {"n": self.n, "entries": self.matrix.tolist()}
        if self.structured:
            d["blocks"] = [{"lambda_re": b.eigenvalue.real, "lambda_im": b.eigenvalue.imag,
                            "order": b.order} for b in self.blocks]
            d["basis"] = self.basis.tolist()
        return d

    @classmethod
    def from_json(cls, d):
        if "entries" not in d:
            raise InvalidInput("dilation JSON needs 'entries'")
        D = cls(d["entries"], d.get("blocks"), d.get("basis"))
        if "n" in d and int(d["n"]) != D.n:
            raise InvalidInput("'n' does not match entries")
        return D


def as_dilation(M):
    return M if isinstance(M, Dilation) else Dilation(M)


def _spectral_of(M, tol):
    if isinstance(M, Dilation):
        return M.spectral(tol)
    return eigen_decompose(np.asarray(M, dtype=float), tol)


def classify_dilation(M, tol=MODULUS_TOL):
    D = as_dilation(M)
    # Jordan orders matter only on the unit circle; decide from moduli when possible
    mods = np.abs(_eigs_from_blocks(D.blocks) if D.structured else np.linalg.eigvals(D.matrix))
    if mods.min() > 1 + tol:
        return DilationClass(EXPANDING, D.det_abs)
    if mods.min() < 1 - tol or mods.max() <= 1 + tol:
        return DilationClass(NOT_EXPANDING_ON_SUBSPACE, D.det_abs)
    sd = D.spectral(tol)
    mods = np.abs(sd.eigenvalues)
    if mods.min() > 1 + tol:
        kind = EXPANDING
    elif mods.min() >= 1 - tol and mods.max() > 1 + tol and all(
            b.order == 1 for b in sd.blocks if abs(abs(b.eigenvalue) - 1) <= tol):
        kind = EXPANDING_ON_SUBSPACE
    else:
        kind = NOT_EXPANDING_ON_SUBSPACE
    return DilationClass(kind, D.det_abs)


def ef_split(M, tol=MODULUS_TOL):
    """E: generalized eigenspaces with |lambda| <= 1+tol; F: the rest. Both A-invariant."""
    D = as_dilation(M)
    A = D.matrix
    n = D.n
    sd = D.spectral(tol)
    means = np.unique(np.round(sd.eigenvalues, 12))
    in_E = lambda lam: abs(means[np.argmin(np.abs(means - lam))]) <= 1 + tol
    dim_E = sum(1 for lam in sd.eigenvalues if abs(lam) <= 1 + tol)
    if n == 1:
        E = np.eye(1)[:, :dim_E]
        F = np.eye(1)[:, dim_E:]
    else:
        _, ZE, sE = scipy.linalg.schur(A, output="real", sort=lambda re, im: in_E(complex(re, im)))
        _, ZF, sF = scipy.linalg.schur(A, output="real", sort=lambda re, im: not in_E(complex(re, im)))
        if sE != dim_E or sF != n - dim_E:
            raise ConfluentSpectrum("Schur reordering disagrees with the spectral clustering")
        E, F = ZE[:, :sE], ZF[:, :sF]
    W = np.hstack([E, F])
    sel = np.diag([0.0] * E.shape[1] + [1.0] * F.shape[1])
    P = W @ sel @ np.linalg.inv(W)
    return SubspaceSplit(E, F, P)


def matrix_power(M, j):
    """M^j computed exactly in rational arithmetic, rounded once at the end.

    Integer matrices with j >= 0 give exact integer entries.
    """
    exact = M.exact if isinstance(M, Dilation) else RatMat.from_float(M)
    return exact.power(int(j)).to_float()


def matrix_power_exact(M, j):
    exact = M.exact if isinstance(M, Dilation) else RatMat.from_float(M)
    return exact.power(int(j))


def lyapunov_form(M, tol=MODULUS_TOL, max_terms=100000):
    """Q = sum_k (M^{-k})^T M^{-k}; then M^{-T} Q M^{-1} = Q - I."""
    D = as_dilation(M)
    if classify_dilation(D, tol).kind != EXPANDING:
        raise NotExpanding("lyapunov_form needs all eigenvalue moduli > 1")
    Minv = np.linalg.inv(D.matrix)
    Q = np.eye(D.n)
    T = np.eye(D.n)
    for _ in range(max_terms):
        T = T @ Minv
        term = T.T @ T
        Q += term
        if np.linalg.norm(term) < 1e-14:
            break
    else:
        raise IllConditioned("Lyapunov series did not converge within max_terms")
    return 0.5 * (Q + Q.T)
