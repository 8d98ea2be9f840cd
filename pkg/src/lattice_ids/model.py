"""Lattice geometry, decaying envelope, heavy-tailed single-site law and beta_L."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the decaying-disorder model on the box Lambda_L in Z^d."""

    d: int
    L: int
    alpha: float
    delta: float

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 0:
            raise ValueError(f"L must be a non-negative integer, got {self.L!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not self.delta > 1:
            raise ValueError(f"delta must be > 1, got {self.delta!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def hypothesis_ok(self) -> bool:
        """True when d - alpha*(delta - 1) > 0, i.e. beta_L diverges."""
        return self.d - self.alpha * (self.delta - 1) > 0

    @property
    def almost_sure_regime(self) -> bool:
        """Regime of the almost-sure (pointwise) bounds."""
        return (
            self.d >= 2
            and 0 < self.alpha < 0.5
            and 1 < self.delta < 1 / (2 * self.alpha)
        )

    @property
    def volume(self) -> int:
        return (2 * self.L + 1) ** self.d

    def with_L(self, L: int) -> "ModelParams":
        return ModelParams(self.d, L, self.alpha, self.delta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        missing = [k for k in ("d", "L", "alpha", "delta") if k not in data]
        if missing:
            raise ValueError(f"missing model keys: {', '.join(missing)}")
        return cls(d=data["d"], L=data["L"], alpha=data["alpha"], delta=data["delta"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


class LatticeBox:
    """The box {n : |n_i| <= L} with a lexicographic index map.

    The first coordinate varies slowest, so each slab with fixed n_1 occupies
    a contiguous block of (2L+1)^(d-1) indices.
    """

    def __init__(self, d: int, L: int):
        if d < 1 or L < 0:
            raise ValueError(f"invalid box d={d}, L={L}")
        self.d = int(d)
        self.L = int(L)
        self.side = 2 * self.L + 1
        self.volume = self.side**self.d
        self._strides = np.array(
            [self.side ** (self.d - 1 - i) for i in range(self.d)], dtype=np.int64
        )

    def __repr__(self):
        return f"LatticeBox(d={self.d}, L={self.L})"

    def __eq__(self, other):
        return isinstance(other, LatticeBox) and (self.d, self.L) == (other.d, other.L)

    def __hash__(self):
        return hash((self.d, self.L))

    def index(self, n) -> int | np.ndarray:
        """Index of coordinate tuple(s) ``n`` (shape (d,) or (k, d))."""
        n = np.asarray(n, dtype=np.int64)
        if np.any(np.abs(n) > self.L):
            raise IndexError(f"coordinates outside box of radius {self.L}")
        idx = (n + self.L) @ self._strides
        return int(idx) if n.ndim == 1 else idx

    def coords(self, i) -> tuple | np.ndarray:
        """Coordinate tuple of index ``i``; an array of indices gives a (k, d) array."""
        scalar = np.ndim(i) == 0
        i = np.atleast_1d(np.asarray(i, dtype=np.int64))
        if np.any((i < 0) | (i >= self.volume)):
            raise IndexError("index outside box")
        out = (i[:, None] // self._strides) % self.side - self.L
        return tuple(int(v) for v in out[0]) if scalar else out

    def all_coords(self) -> np.ndarray:
        return _box_coords(self.d, self.L)

    def sup_norms(self) -> np.ndarray:
        return _box_sup_norms(self.d, self.L)


@lru_cache(maxsize=64)
def _box_coords(d: int, L: int) -> np.ndarray:
    axes = [np.arange(-L, L + 1)] * d
    grid = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=64)
def _box_sup_norms(d: int, L: int) -> np.ndarray:
    norms = np.abs(_box_coords(d, L)).max(axis=1)
    norms.setflags(write=False)
    return norms


def envelope(n, alpha: float) -> float | np.ndarray:
    """a_n = max(1, ||n||_inf)^(-alpha).

    ``n`` is one coordinate tuple (returns a float) or a (k, d) array.
    """
    arr = np.asarray(n)
    if arr.ndim == 0:
        norm = np.abs(arr)
    elif arr.ndim == 1:
        norm = np.abs(arr).max() if arr.size else 0
    else:
        norm = np.abs(arr).max(axis=1)
    vals = np.maximum(1.0, norm) ** (-float(alpha))
    return float(vals) if np.ndim(vals) == 0 else vals


def shell_sizes(d: int, L: int) -> np.ndarray:
    """Number of sites with ||n||_inf = s for s = 0..L."""
    s = np.arange(L + 1, dtype=np.int64)
    inner = np.where(s > 0, (2 * s - 1) ** d, 0)
    return (2 * s + 1) ** d - inner


def shell_envelope(L: int, alpha: float) -> np.ndarray:
    return np.maximum(1.0, np.arange(L + 1, dtype=float)) ** (-float(alpha))


def beta_L(params: ModelParams) -> float:
    """Normalization beta_L = sum over Lambda_L of a_n^(delta - 1)."""
    sizes = shell_sizes(params.d, params.L)
    a = shell_envelope(params.L, params.alpha)
    return float(np.sum(sizes * a ** (params.delta - 1)))


# Single-site law: density (delta-1)/2 |x|^-delta on |x| >= 1, zero inside.

def rho(x, delta: float):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        out = np.where(ax >= 1, 0.5 * (delta - 1) * ax ** (-delta), 0.0)
    return float(out) if out.ndim == 0 else out


def cdf(x, delta: float):
    x = np.asarray(x, dtype=float)
    ax = np.maximum(np.abs(x), 1.0)
    tail = 0.5 * ax ** (1 - delta)
    out = np.where(x <= -1, tail, np.where(x >= 1, 1 - tail, 0.5))
    return float(out) if out.ndim == 0 else out


def quantile(u, delta: float):
    """Inverse CDF on (0, 1); quantile(1/2) is fixed to -1."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise ValueError("quantile requires u in the open interval (0, 1)")
    p = -1.0 / (delta - 1)
    lower = u <= 0.5
    base = np.where(lower, 2 * u, 2 * (1 - u))
    out = np.where(lower, -(base**p), base**p)
    return float(out) if out.ndim == 0 else out


def tail_mass(x, delta: float):
    """mu(-inf, -x] = mu[x, inf) for x > 0, i.e. (1/2) min(1, x^(1-delta))."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.minimum(1.0, np.maximum(x, 1.0) ** (1 - delta))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HeavyTailDist:
    delta: float

    def __post_init__(self):
        if not self.delta > 1:
            raise ValueError(f"delta must be > 1, got {self.delta!r}")

    def pdf(self, x):
        return rho(x, self.delta)

    def cdf(self, x):
        return cdf(x, self.delta)

    def ppf(self, u):
        return quantile(u, self.delta)

    def sample(self, rng: np.random.Generator, size=None):
        return sample_q(rng, self.delta, size)


def open_uniform(raw: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to uniforms strictly inside (0, 1)."""
    return ((np.asarray(raw, dtype=np.uint64) >> np.uint64(12)).astype(float) + 0.5) * 2.0**-52


def sample_q(rng: np.random.Generator, delta: float, size=None):
    """Inverse-CDF draw(s) from the heavy-tailed law; |q| >= 1 always."""
    n = 1 if size is None else int(np.prod(size))
    u = open_uniform(rng.bit_generator.random_raw(n))
    q = quantile(u, delta)
    if size is None:
        return float(np.asarray(q).ravel()[0])
    return np.asarray(q).reshape(size)
