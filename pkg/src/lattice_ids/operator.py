"""Finite-volume Hamiltonian H = -Delta + V on Lambda_L and its diagonal brackets."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .model import LatticeBox, ModelParams, envelope, open_uniform, quantile


@lru_cache(maxsize=64)
def shell_rank(d: int, L: int) -> np.ndarray:
    """Global site rank of each box index under the (shell, lexicographic) order.

    Sites are enumerated shell by shell (||n||_inf = 0, 1, 2, ...) and
    lexicographically inside a shell. Lambda_L is then exactly the first
    (2L+1)^d ranks, so a stream consumed in rank order restricts cleanly to
    smaller boxes.
    """
    box = LatticeBox(d, L)
    coords = box.all_coords()
    keys = [coords[:, i] for i in range(d - 1, -1, -1)] + [box.sup_norms()]
    order = np.lexsort(keys)
    rank = np.empty(box.volume, dtype=np.int64)
    rank[order] = np.arange(box.volume)
    rank.setflags(write=False)
    return rank


def realization_stream(master_seed: int, realization_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(master_seed), int(realization_index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class Disorder:
    """One realization of {q_n} on Lambda_L, indexed by box index."""

    params: ModelParams
    q: np.ndarray
    seed_provenance: tuple = (None, None)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.params.volume,):
            raise ValueError(f"q has shape {q.shape}, expected ({self.params.volume},)")
        if self.validate and np.any(np.abs(q) < 1):
            raise ValueError("disorder values must satisfy |q| >= 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def box(self) -> LatticeBox:
        return LatticeBox(self.params.d, self.params.L)

    def potential(self) -> np.ndarray:
        """Diagonal a_n q_n."""
        return site_envelope(self.params) * self.q


def site_envelope(params: ModelParams) -> np.ndarray:
    return _site_envelope(params.d, params.L, params.alpha)


@lru_cache(maxsize=64)
def _site_envelope(d: int, L: int, alpha: float) -> np.ndarray:
    a = envelope(LatticeBox(d, L).all_coords(), alpha)
    a.setflags(write=False)
    return a


def sample_disorder(params: ModelParams, master_seed: int, realization_index: int) -> Disorder:
    """Deterministic realization keyed by (master_seed, realization_index).

    The value at site n depends only on n and the two keys, so boxes of
    different radius see the same q_n on their common sites.
    """
    rng = realization_stream(master_seed, realization_index)
    raw = rng.bit_generator.random_raw(params.volume)
    u = open_uniform(raw)[shell_rank(params.d, params.L)]
    q = quantile(u, params.delta)
    return Disorder(params, q, (int(master_seed), int(realization_index)))


@dataclass(frozen=True, eq=False)
class SparseSymOperator:
    """Symmetric matrix stored as upper-triangle triplets (row <= col).

    ``lattice`` tags operators assembled on a LatticeBox with unit
    nearest-neighbour hopping; the spectral module uses it to pick a
    structured factorization.
    """

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    lattice: LatticeBox | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("triplet arrays must have equal length")
        if np.any(rows > cols):
            raise ValueError("entries must satisfy row <= col")
        if rows.size and (rows.min() < 0 or cols.max() >= self.dimension):
            raise ValueError("entry outside matrix dimension")
        keys = rows * self.dimension + cols
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate entries")
        for a in (rows, cols, vals):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @property
    def nnz_upper(self) -> int:
        return int(self.values.size)

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        on = self.rows == self.cols
        out[self.rows[on]] = self.values[on]
        return out

    def to_csr(self) -> sp.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.values, self.values[off]])
        return sp.csr_matrix((v, (r, c)), shape=(self.dimension, self.dimension))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def inf_norm(self) -> float:
        if self.dimension == 0:
            return 0.0
        return float(abs(self.to_csr()).sum(axis=1).max())

    def permuted(self, perm) -> "SparseSymOperator":
        """Relabel index i as perm[i]; the result is P H P^T (lattice tag dropped)."""
        perm = np.asarray(perm, dtype=np.int64)
        r, c = perm[self.rows], perm[self.cols]
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        return SparseSymOperator(self.dimension, lo, hi, self.values)

    def dump(self, path) -> None:
        """Write 'row col value' lines (0-based, upper triangle)."""
        order = np.lexsort((self.cols, self.rows))
        with open(path, "w") as fh:
            for k in order:
                fh.write(f"{self.rows[k]} {self.cols[k]} {self.values[k]:.17g}\n")

    @classmethod
    def load(cls, path, dimension: int) -> "SparseSymOperator":
        data = np.loadtxt(path, ndmin=2)
        if data.size == 0:
            return cls(dimension, [], [], [])
        return cls(dimension, data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2])


@lru_cache(maxsize=64)
def neighbor_pairs(d: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbour pairs (i, j), i < j, inside the box; built once per (d, L)."""
    box = LatticeBox(d, L)
    coords = box.all_coords()
    idx = np.arange(box.volume, dtype=np.int64)
    rows, cols = [], []
    for axis in range(d):
        has_next = coords[:, axis] < L
        rows.append(idx[has_next])
        cols.append(idx[has_next] + box._strides[axis])
    i = np.concatenate(rows) if rows else np.empty(0, np.int64)
    j = np.concatenate(cols) if cols else np.empty(0, np.int64)
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def hamiltonian_from_diagonal(box: LatticeBox, diag) -> SparseSymOperator:
    """-Delta restricted to the box plus an arbitrary diagonal (no support check)."""
    diag = np.asarray(diag, dtype=float)
    if diag.shape != (box.volume,):
        raise ValueError(f"diagonal has shape {diag.shape}, expected ({box.volume},)")
    i, j = neighbor_pairs(box.d, box.L)
    sites = np.arange(box.volume, dtype=np.int64)
    rows = np.concatenate([sites, i])
    cols = np.concatenate([sites, j])
    vals = np.concatenate([diag, -np.ones(i.size)])
    return SparseSymOperator(box.volume, rows, cols, vals, lattice=box)


def assemble_hamiltonian(disorder: Disorder) -> SparseSymOperator:
    return hamiltonian_from_diagonal(disorder.box, disorder.potential())


@dataclass(frozen=True, eq=False)
class BracketDiagonal:
    sign: int
    diag: np.ndarray

    def sorted(self) -> np.ndarray:
        return np.sort(self.diag)


def parse_sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def bracket_diagonal(disorder: Disorder, sign) -> BracketDiagonal:
    """Diagonal of A_{L,+-} = +-2d + a_n q_n; its entries are its spectrum."""
    s = parse_sign(sign)
    diag = s * 2 * disorder.params.d + disorder.potential()
    diag.setflags(write=False)
    return BracketDiagonal(s, diag)
