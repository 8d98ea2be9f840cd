"""Eigenvalue counting by matrix inertia, bracket counts, and a dense oracle.

The count of eigenvalues of H at or below E is the number of negative pivots
of a symmetric block factorization of H - E (Sylvester's law of inertia).
Lattice operators are factorized slab by slab: with slabs ordered along the
first coordinate, H - E is block tridiagonal with -I couplings, and the
Schur complements obey S_k = D_k - E - S_{k-1}^{-1}. The inertia of H - E is
the sum of the inertias of the S_k. For d = 1 this is the classical Sturm
sequence. Operators without lattice structure go through a dense
Bunch-Kaufman LDL^T factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import LatticeBox
from .operator import Disorder, SparseSymOperator, bracket_diagonal, neighbor_pairs

log = logging.getLogger(__name__)

PIVOT_RTOL = 1e-12
SHIFT_RTOL = 1e-9
MAX_RETRIES = 3
DENSE_CAP = 5000


class NearSingularShift(ArithmeticError):
    """E stayed within pivot tolerance of an eigenvalue after all retries."""

    def __init__(self, energy, attempts):
        super().__init__(f"no regular shift found near E={energy!r} after {attempts} attempts")
        self.energy = energy
        self.attempts = attempts


class DimensionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Inertia:
    """Pivot-sign counts of H - E' where E' is E after any tie-breaking shift."""

    energy: float
    shifted_energy: float
    negative: int
    positive: int
    retries: int = 0

    @property
    def perturbed(self) -> bool:
        return self.retries > 0


@lru_cache(maxsize=32)
def _slab_hopping(d: int, L: int) -> np.ndarray:
    """Dense -Delta restricted to one slab (a (d-1)-dimensional box)."""
    if d == 1:
        return np.zeros((1, 1))
    m = (2 * L + 1) ** (d - 1)
    out = np.zeros((m, m))
    i, j = neighbor_pairs(d - 1, L)
    out[i, j] = -1.0
    out[j, i] = -1.0
    out.setflags(write=False)
    return out


def _jacobi_scale(a: np.ndarray) -> np.ndarray:
    """Congruence scaling that tames rows with huge diagonal entries.

    Returns s with s_i = 1/sqrt(max(|a_ii|, 1)); diag(s) a diag(s) has the
    same inertia as ``a`` (Sylvester) but O(1) diagonal entries, so a
    normwise-stable eigensolver resolves the signs of its small eigenvalues.
    Heavy-tailed disorder puts entries of size 1e12 and beyond next to the
    unit hopping terms, where unscaled eigensolvers lose all small eigenvalues.
    """
    d = np.abs(np.diagonal(a, axis1=-2, axis2=-1))
    return 1.0 / np.sqrt(np.maximum(d, 1.0))


def _sturm(diag: np.ndarray, energies: np.ndarray):
    """Sturm recursion for tridiagonal matrices with unit off-diagonals."""
    neg = np.zeros(energies.size, dtype=np.int64)
    pos = np.zeros(energies.size, dtype=np.int64)
    singular = np.zeros(energies.size, dtype=bool)
    recip = np.zeros(energies.size)
    for dk in diag:
        shifted = dk - energies
        piv = shifted - recip
        # rounding in the subtraction is about eps * (|shifted| + |recip|)
        tol = PIVOT_RTOL * (np.abs(shifted) + np.abs(recip) + 1.0)
        small = np.abs(piv) < tol
        singular |= small
        piv = np.where(small, tol, piv)
        neg += piv < 0
        pos += piv > 0
        recip = 1.0 / piv
    return neg, pos, singular, np.zeros(energies.size, dtype=bool)


def _block_sweep(box: LatticeBox, diag: np.ndarray, energies: np.ndarray):
    hop = _slab_hopping(box.d, box.L)
    m = hop.shape[0]
    n_e = energies.size
    neg = np.zeros(n_e, dtype=np.int64)
    pos = np.zeros(n_e, dtype=np.int64)
    singular = np.zeros(n_e, dtype=bool)
    unstable = np.zeros(n_e, dtype=bool)
    eye = np.eye(m)
    s_inv = np.zeros((n_e, m, m))
    for k in range(box.side):
        block = hop + np.diag(diag[k * m:(k + 1) * m])
        schur = block[None, :, :] - energies[:, None, None] * eye - s_inv
        bad = ~np.isfinite(schur).all(axis=(1, 2))
        if bad.any():
            unstable |= bad
            schur[bad] = eye
        sc = _jacobi_scale(schur)
        scaled = sc[:, :, None] * schur * sc[:, None, :]
        w, v = np.linalg.eigh(scaled)
        tol = PIVOT_RTOL * np.maximum(1.0, np.abs(w).max(axis=1))
        small = np.abs(w) < tol[:, None]
        singular |= small.any(axis=1)
        w = np.where(small, tol[:, None], w)
        neg += (w < 0).sum(axis=1)
        pos += (w > 0).sum(axis=1)
        sv = sc[:, :, None] * v
        s_inv = np.einsum("eij,ej,ekj->eik", sv, 1.0 / w, sv)
    return neg, pos, singular, unstable


def _ldl_one(a: np.ndarray, energy: float):
    """Bunch-Kaufman LDL^T of the scaled a - energy*I; inertia from the 1x1/2x2 blocks."""
    n = a.shape[0]
    shifted = a - energy * np.eye(n)
    sc = _jacobi_scale(shifted)
    shifted = sc[:, None] * shifted * sc[None, :]
    _, dblk, _ = scipy.linalg.ldl(shifted, lower=True)
    tol = PIVOT_RTOL * max(1.0, float(np.abs(shifted).sum(axis=1).max()) if n else 1.0)
    neg = pos = 0
    singular = False
    i = 0
    while i < n:
        if i + 1 < n and dblk[i + 1, i] != 0.0:
            w = np.linalg.eigvalsh(dblk[i:i + 2, i:i + 2])
            i += 2
        else:
            w = np.array([dblk[i, i]])
            i += 1
        if not np.isfinite(w).all():
            return neg, pos, singular, True
        singular |= bool(np.any(np.abs(w) < tol))
        neg += int(np.sum(w < 0))
        pos += int(np.sum(w > 0))
    return neg, pos, singular, False


def _ldl(H: SparseSymOperator, energies: np.ndarray):
    a = H.to_dense()
    out = [_ldl_one(a, e) for e in energies]
    if not out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, bool), np.zeros(0, bool)
    return tuple(np.array(col) for col in zip(*out))


def _raw_inertia(H: SparseSymOperator, energies: np.ndarray, method: str):
    if method == "auto":
        if H.lattice is None:
            method = "ldl"
        else:
            method = "sturm" if H.lattice.d == 1 else "block"
    if method == "ldl":
        return _ldl(H, energies)
    if H.lattice is None:
        raise ValueError(f"method {method!r} needs a lattice-tagged operator")
    diag = H.diagonal()
    if method == "sturm":
        if H.lattice.d != 1:
            raise ValueError("Sturm counting applies to d = 1 only")
        return _sturm(diag, energies)
    if method == "block":
        return _block_sweep(H.lattice, diag, energies)
    raise ValueError(f"unknown method {method!r}")


def shifted_inertia(H: SparseSymOperator, energies, directions=1, method: str = "auto") -> list[Inertia]:
    """Inertia of H - E for each energy, nudging E off near-eigenvalues.

    A pivot below tolerance means E sits on (or within rounding of) an
    eigenvalue. The energy is then moved by eta = 1e-9 (1 + |E|) in the
    given direction, doubling eta on each further attempt. Counting "<= E"
    should move up (+1) and counting ">= E" down (-1) so the eigenvalue at E
    is included.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    directions = np.broadcast_to(np.asarray(directions, dtype=float), energies.shape)
    shifts = np.zeros_like(energies)
    retries = np.zeros(energies.size, dtype=int)
    neg = np.zeros(energies.size, dtype=np.int64)
    pos = np.zeros(energies.size, dtype=np.int64)
    todo = np.arange(energies.size)
    for attempt in range(MAX_RETRIES + 1):
        e_try = energies[todo] + shifts[todo]
        n, p, singular, unstable = _raw_inertia(H, e_try, method)
        if np.any(unstable):
            log.debug("structured sweep unstable at %d energies; using dense LDL", int(unstable.sum()))
            redo = np.flatnonzero(unstable)
            n2, p2, s2, u2 = _ldl(H, e_try[redo])
            if np.any(u2):
                raise NearSingularShift(float(energies[todo[redo[np.argmax(u2)]]]), attempt + 1)
            n, p, singular = n.copy(), p.copy(), singular.copy()
            n[redo], p[redo], singular[redo] = n2, p2, s2
        ok = ~singular
        neg[todo[ok]] = n[ok]
        pos[todo[ok]] = p[ok]
        todo = todo[singular]
        if todo.size == 0:
            break
        if attempt == MAX_RETRIES:
            raise NearSingularShift(float(energies[todo[0]]), attempt + 1)
        eta = SHIFT_RTOL * (1 + np.abs(energies[todo]))
        shifts[todo] = directions[todo] * eta * 2.0**attempt
        retries[todo] += 1
        log.debug("near-singular shift at %d energies, retry %d", todo.size, attempt + 1)
    return [
        Inertia(float(energies[k]), float(energies[k] + shifts[k]), int(neg[k]), int(pos[k]), int(retries[k]))
        for k in range(energies.size)
    ]


def count_leq(H: SparseSymOperator, E: float, method: str = "auto") -> int:
    """#{eigenvalues of H <= E}."""
    return shifted_inertia(H, [E], 1, method)[0].negative


def count_geq(H: SparseSymOperator, E: float, method: str = "auto") -> int:
    """#{eigenvalues of H >= E}."""
    return shifted_inertia(H, [E], -1, method)[0].positive


def parse_kind(kind: str) -> str:
    if kind not in ("leq", "geq"):
        raise ValueError(f"kind must be 'leq' or 'geq', got {kind!r}")
    return kind


def bracket_count(disorder: Disorder, sign, E: float, kind: str) -> int:
    """N_{+-,L}(E) or its '>=' mirror, read directly off the bracket diagonal."""
    diag = bracket_diagonal(disorder, sign).diag
    if parse_kind(kind) == "leq":
        return int(np.count_nonzero(diag <= E))
    return int(np.count_nonzero(diag >= E))


def eigenvalues_dense(H: SparseSymOperator, cap: int = DENSE_CAP) -> np.ndarray:
    if H.dimension > cap:
        raise DimensionTooLarge(f"dimension {H.dimension} exceeds dense cap {cap}")
    return np.linalg.eigvalsh(H.to_dense())


def dense_count(eigs: np.ndarray, E: float, kind: str) -> int:
    if parse_kind(kind) == "leq":
        return int(np.count_nonzero(eigs <= E))
    return int(np.count_nonzero(eigs >= E))


@dataclass(frozen=True)
class CountStatistic:
    energy: float
    count: int
    kind: str
    normalizer: float
    realization: tuple = (None, None)
    perturbed: bool = False

    @property
    def normalized(self) -> float:
        return self.count / self.normalizer
