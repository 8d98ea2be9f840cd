"""Closed-form bracket expectations and Monte Carlo estimators of normalized counts.

All Monte Carlo routines draw realization ``i`` from the stream keyed by
(master_seed, i) and aggregate exact integer counts in index order, so a
result depends only on (params, trials, master_seed) and never on ``jobs``.
"""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .model import ModelParams, beta_L, cdf, shell_envelope, shell_sizes
from .operator import assemble_hamiltonian, bracket_diagonal, sample_disorder
from .spectral import shifted_inertia

log = logging.getLogger(__name__)

SIGMA_WINDOW = 4.0


class EnergyInsideBand(ValueError):
    pass


class BadBand(ValueError):
    pass


class RegimeViolation(ValueError):
    pass


# -- closed forms -----------------------------------------------------------

def expected_diag_tail(params: ModelParams, c: float) -> float:
    """Sum over the box of mu(-inf, -c/a_n] = (1/2) sum min(1, (a_n/c)^(delta-1)).

    By symmetry this is also the expected number of sites with a_n q_n >= c.
    """
    if not c > 0:
        raise ValueError(f"threshold must be positive, got {c!r}")
    sizes = shell_sizes(params.d, params.L)
    a = shell_envelope(params.L, params.alpha)
    per_site = 0.5 * np.minimum(1.0, (a / c) ** (params.delta - 1))
    return float(np.sum(sizes * per_site))


def _check_outside(params: ModelParams, E: float, kind: str):
    edge = 2 * params.d
    if kind == "leq" and not E < -edge:
        raise EnergyInsideBand(f"E={E} must be below -2d={-edge} for '<=' counts")
    if kind == "geq" and not E > edge:
        raise EnergyInsideBand(f"E={E} must be above 2d={edge} for '>=' counts")


def bracket_threshold(params: ModelParams, E: float, sign: int, kind: str) -> float:
    """Threshold c with E[bracket count] = expected_diag_tail(c)."""
    two_d = 2 * params.d
    if kind == "leq":
        return -E - two_d if sign < 0 else two_d - E
    return E - two_d if sign > 0 else E + two_d


def expected_bracket(params: ModelParams, E: float, sign, kind: str) -> float:
    from .operator import parse_sign
    from .spectral import parse_kind

    s, k = parse_sign(sign), parse_kind(kind)
    _check_outside(params, E, k)
    return expected_diag_tail(params, bracket_threshold(params, E, s, k))


def kind_for_energy(params: ModelParams, E: float) -> str:
    if E < -2 * params.d:
        return "leq"
    if E > 2 * params.d:
        return "geq"
    raise EnergyInsideBand(f"E={E} lies inside [-2d, 2d] = [{-2 * params.d}, {2 * params.d}]")


def mean_count_bounds(params: ModelParams, E: float) -> tuple[float, float]:
    """Large-L window for E[count]/beta_L at |E| = 2d + eps."""
    kind_for_energy(params, E)
    eps = abs(E) - 2 * params.d
    p = params.delta - 1
    return 0.5 * (4 * params.d + eps) ** (-p), 0.5 * eps ** (-p)


def pointwise_bounds(params: ModelParams, E: float) -> tuple[float, float]:
    """Almost-sure window for count/beta_L; same numbers as mean_count_bounds."""
    two_d = 2 * params.d
    p = params.delta - 1
    if E < -two_d:
        return 0.5 * (two_d - E) ** (-p), 0.5 * (-two_d - E) ** (-p)
    if E > two_d:
        return 0.5 * (two_d + E) ** (-p), 0.5 * (E - two_d) ** (-p)
    raise EnergyInsideBand(f"E={E} lies inside the band")


def vague_bound(params: ModelParams, M1: float, M2: float) -> float:
    if not (M1 < -2 * params.d and M2 > 2 * params.d):
        raise BadBand("need M1 < -2d and M2 > 2d")
    p = params.delta - 1
    return 0.5 * ((-2 * params.d - M1) ** (-p) + (M2 - 2 * params.d) ** (-p))


def nontrivial_constant(params: ModelParams, lo: float, hi: float) -> float:
    """Lower bound for the large-L mass of [lo, hi] outside the band.

    Only intervals entirely below -2d or entirely above 2d are handled;
    the value is positive iff the interval is longer than 4d.
    """
    two_d, p = 2 * params.d, params.delta - 1
    if hi < -two_d:
        eps_far, eps_near = -two_d - lo, -two_d - hi
    elif lo > two_d:
        eps_far, eps_near = hi - two_d, lo - two_d
    else:
        raise BadBand("interval must lie strictly on one side of [-2d, 2d]")
    return 0.5 * ((2 * two_d + eps_near) ** (-p) - eps_far ** (-p))


def interior_envelope(params: ModelParams, M1: float, M2: float) -> tuple[float, float]:
    """Deterministic bounds for E[#(sigma cap (M1, M2))] / volume."""
    two_d = 2 * params.d
    if not (M1 < -two_d and M2 > two_d):
        raise BadBand(f"(M1, M2)=({M1}, {M2}) must strictly contain [-2d, 2d]")
    vol = params.volume
    lower = 1 - (expected_diag_tail(params, -two_d - M1) + expected_diag_tail(params, M2 - two_d)) / vol
    upper = 1 - (expected_diag_tail(params, two_d - M1) + expected_diag_tail(params, M2 + two_d)) / vol
    return lower, upper


def site_tail_probabilities(params: ModelParams, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-shell success probability of the indicator q_n <= -c/a_n, and shell sizes."""
    a = shell_envelope(params.L, params.alpha)
    return 0.5 * np.minimum(1.0, (a / c) ** (params.delta - 1)), shell_sizes(params.d, params.L)


# -- Monte Carlo machinery --------------------------------------------------

@dataclass
class RealizationCounts:
    index: int
    negative: np.ndarray
    positive: np.ndarray
    perturbed: np.ndarray
    bracket_minus_leq: np.ndarray
    bracket_plus_leq: np.ndarray
    bracket_minus_geq: np.ndarray
    bracket_plus_geq: np.ndarray

    def leq(self, k: int) -> int:
        return int(self.negative[k])

    def geq(self, k: int) -> int:
        return int(self.positive[k])


def realization_counts(params: ModelParams, master_seed: int, probes: tuple, index: int) -> RealizationCounts:
    """Inertia and bracket counts of one realization at each (E, direction) probe."""
    dis = sample_disorder(params, master_seed, index)
    H = assemble_hamiltonian(dis)
    energies = np.array([e for e, _ in probes], dtype=float)
    dirs = np.array([s for _, s in probes], dtype=float)
    inert = shifted_inertia(H, energies, dirs)
    lo = bracket_diagonal(dis, -1).diag
    hi = bracket_diagonal(dis, +1).diag
    return RealizationCounts(
        index=index,
        negative=np.array([x.negative for x in inert]),
        positive=np.array([x.positive for x in inert]),
        perturbed=np.array([x.perturbed for x in inert]),
        bracket_minus_leq=np.array([np.count_nonzero(lo <= e) for e in energies]),
        bracket_plus_leq=np.array([np.count_nonzero(hi <= e) for e in energies]),
        bracket_minus_geq=np.array([np.count_nonzero(lo >= e) for e in energies]),
        bracket_plus_geq=np.array([np.count_nonzero(hi >= e) for e in energies]),
    )


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def run_realizations(params: ModelParams, master_seed: int, probes, trials: int, jobs: int = 1) -> list[RealizationCounts]:
    fn = partial(realization_counts, params, int(master_seed), tuple(probes))
    indices = range(int(trials))
    if jobs <= 1 or trials < 2:
        return [fn(i) for i in indices]
    chunk = max(1, trials // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, indices, chunksize=chunk))


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def jackknife_stderr(values, statistic) -> float:
    v = np.asarray(values, dtype=float)
    n = v.size
    loo = np.array([statistic(np.delete(v, i)) for i in range(n)])
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def variance_excess(counts) -> tuple[float, float]:
    """(sample variance - sample mean, jackknife stderr of that difference).

    A sum of independent indicators has variance at most its mean, so the
    first number should not exceed a few multiples of the second.
    """
    stat = lambda x: float(np.var(x, ddof=1) - np.mean(x))  # noqa: E731
    return stat(np.asarray(counts, float)), jackknife_stderr(counts, stat)


@dataclass
class MCReport:
    estimate: float
    stderr: float
    trials: int
    seed: int
    params: ModelParams
    energy_or_interval: object
    closed_form: float | None = None
    limit_bounds: tuple | None = None
    details: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def closed_form_z(self) -> float | None:
        if self.closed_form is None or not self.stderr > 0:
            return None
        return abs(self.estimate - self.closed_form) / self.stderr

    def within(self, lo: float, hi: float, k: float = SIGMA_WINDOW) -> bool:
        return lo - k * self.stderr <= self.estimate <= hi + k * self.stderr

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed,
            "params": self.params.to_dict(),
            "energy_or_interval": self.energy_or_interval,
            "closed_form": self.closed_form,
            "closed_form_z": self.closed_form_z,
            "limit_bounds": list(self.limit_bounds) if self.limit_bounds else None,
            "details": self.details,
        }


def _summary(values, expected=None) -> dict:
    m, s = mean_stderr(values)
    out = {"estimate": m, "stderr": s}
    if expected is not None:
        out["closed_form"] = expected
        out["z"] = abs(m - expected) / s if s > 0 else (0.0 if m == expected else math.inf)
    return out


def mc_expected_count(params: ModelParams, E: float, kind: str | None = None, trials: int = 1000,
                      master_seed: int = 0, jobs: int = 1) -> MCReport:
    """Monte Carlo mean of N_L(E)/beta_L (kind 'leq') or its '>=' mirror (kind 'geq')."""
    kind = kind or kind_for_energy(params, E)
    _check_outside(params, E, kind)
    if trials < 2:
        raise ValueError("need at least 2 trials")
    beta = beta_L(params)
    direction = 1 if kind == "leq" else -1
    rows = run_realizations(params, master_seed, [(E, direction)], trials, jobs)
    if kind == "leq":
        count = np.array([r.leq(0) for r in rows])
        inner = np.array([r.bracket_plus_leq[0] for r in rows])
        outer = np.array([r.bracket_minus_leq[0] for r in rows])
        inner_sign, outer_sign = +1, -1
    else:
        count = np.array([r.geq(0) for r in rows])
        inner = np.array([r.bracket_minus_geq[0] for r in rows])
        outer = np.array([r.bracket_plus_geq[0] for r in rows])
        inner_sign, outer_sign = -1, +1
    violations = int(np.count_nonzero((inner > count) | (count > outer)))
    exp_inner = expected_bracket(params, E, inner_sign, kind) / beta
    exp_outer = expected_bracket(params, E, outer_sign, kind) / beta
    est, se = mean_stderr(count / beta)
    return MCReport(
        estimate=est,
        stderr=se,
        trials=trials,
        seed=int(master_seed),
        params=params,
        energy_or_interval=E,
        closed_form=None,
        limit_bounds=mean_count_bounds(params, E),
        details={
            "kind": kind,
            "beta_L": beta,
            "volume": params.volume,
            "closed_form_window": [exp_inner, exp_outer],
            "inner_bracket": _summary(inner / beta, exp_inner),
            "outer_bracket": _summary(outer / beta, exp_outer),
            "sandwich_violations": violations,
            "perturbed_realizations": int(sum(bool(r.perturbed[0]) for r in rows)),
        },
        raw={"index": np.arange(trials), "count": count, "inner": inner, "outer": outer, "beta_L": beta},
    )


# -- gamma_L ----------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def parse(cls, spec) -> "Interval":
        """Accept an Interval, a (lo, hi) pair, or text like '(-inf,-5]'."""
        if isinstance(spec, Interval):
            return spec
        if isinstance(spec, str):
            s = spec.strip()
            lo_c, hi_c = s[0] == "[", s[-1] == "]"
            if s[0] not in "[(" or s[-1] not in "])":
                raise ValueError(f"bad interval text {spec!r}")
            lo, hi = (float(x) for x in s[1:-1].split(","))
            return cls(lo, hi, lo_c and math.isfinite(lo), hi_c and math.isfinite(hi))
        lo, hi = spec
        return cls(float(lo), float(hi), math.isfinite(lo), math.isfinite(hi))

    def __str__(self):
        def fmt(x):
            return "inf" if x == math.inf else "-inf" if x == -math.inf else f"{x:.15g}"
        return f"{'[' if self.lo_closed else '('}{fmt(self.lo)},{fmt(self.hi)}{']' if self.hi_closed else ')'}"

    def overlaps(self, other: "Interval") -> bool:
        if self.hi < other.lo or other.hi < self.lo:
            return False
        if self.hi == other.lo:
            return self.hi_closed and other.lo_closed
        if other.hi == self.lo:
            return other.hi_closed and self.lo_closed
        return True


def _as_union(item) -> tuple[Interval, ...]:
    if isinstance(item, (list, tuple)) and item and not isinstance(item[0], (int, float)):
        return tuple(Interval.parse(x) for x in item)
    return (Interval.parse(item),)


def _interval_probes(pieces) -> list[tuple[float, int]]:
    probes = []
    for iv in pieces:
        for x in (iv.lo, iv.hi):
            if math.isfinite(x):
                probes += [(x, +1), (x, -1)]
    return sorted(set(probes))


def interval_count(rc: RealizationCounts, probes, volume: int, iv: Interval) -> int:
    pos = {p: k for k, p in enumerate(probes)}

    def leq(x):
        return rc.leq(pos[(x, +1)])

    def lt(x):
        return volume - rc.geq(pos[(x, -1)])

    upper = volume if iv.hi == math.inf else (leq(iv.hi) if iv.hi_closed else lt(iv.hi))
    lower = 0 if iv.lo == -math.inf else (lt(iv.lo) if iv.lo_closed else leq(iv.lo))
    return upper - lower


@dataclass
class GammaMeasure:
    intervals: list
    masses: list
    stderrs: list
    L: int
    params: ModelParams
    trials: int
    seed: int = 0
    counts: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "intervals": [" U ".join(str(p) for p in u) for u in self.intervals],
            "masses": self.masses,
            "stderrs": self.stderrs,
            "L": self.L,
            "params": self.params.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
        }


def gamma_measure(params: ModelParams, intervals, trials: int = 200, master_seed: int = 0,
                  jobs: int = 1) -> GammaMeasure:
    """Per-interval mean of #(sigma(H) cap I)/beta_L.

    Each entry of ``intervals`` is an interval or a tuple of intervals taken
    as their union. Pieces of one union must be pairwise disjoint; separate
    entries are measured independently and may overlap.
    """
    unions = [_as_union(item) for item in intervals]
    for union in unions:
        for i in range(len(union)):
            for j in range(i + 1, len(union)):
                if union[i].overlaps(union[j]):
                    raise ValueError(f"intervals {union[i]} and {union[j]} overlap")
    pieces = [p for u in unions for p in u]
    probes = _interval_probes(pieces)
    beta = beta_L(params)
    vol = params.volume
    if probes:
        rows = run_realizations(params, master_seed, probes, trials, jobs)
    else:
        rows = [None] * trials
    counts = np.zeros((trials, len(unions)), dtype=np.int64)
    for t, rc in enumerate(rows):
        for u, union in enumerate(unions):
            counts[t, u] = sum(interval_count(rc, probes, vol, iv) if rc is not None else vol for iv in union)
    masses, errs = [], []
    for u in range(len(unions)):
        m, s = mean_stderr(counts[:, u] / beta)
        masses.append(m)
        errs.append(s)
    return GammaMeasure(unions, masses, errs, params.L, params, trials, int(master_seed), counts)


# -- interior fraction ------------------------------------------------------

def interior_fraction(params: ModelParams, M1: float, M2: float, trials: int = 200,
                      master_seed: int = 0, jobs: int = 1) -> MCReport:
    """Mean of #(sigma(H) cap (M1, M2)) / volume with its bracket envelope."""
    envelope = interior_envelope(params, M1, M2)
    vol = params.volume
    rows = run_realizations(params, master_seed, [(M1, +1), (M2, -1)], trials, jobs)
    below = np.array([r.leq(0) for r in rows])
    above = np.array([r.geq(1) for r in rows])
    middle = vol - below - above
    # independent route: strict count below M2 from the same factorization
    middle_direct = np.array([r.negative[1] for r in rows]) - below
    partition_failures = int(np.count_nonzero(below + middle_direct + above != vol))
    est, se = mean_stderr(middle / vol)
    return MCReport(
        estimate=est,
        stderr=se,
        trials=trials,
        seed=int(master_seed),
        params=params,
        energy_or_interval=[M1, M2],
        limit_bounds=(envelope[0], envelope[1]),
        details={
            "envelope": list(envelope),
            "volume": vol,
            "beta_L": beta_L(params),
            "tail_below": _summary(below / vol),
            "tail_above": _summary(above / vol),
            "partition_failures": partition_failures,
            "perturbed_realizations": int(sum(bool(r.perturbed.any()) for r in rows)),
        },
        raw={"index": np.arange(trials), "count": middle, "below": below, "above": above},
    )


# -- pointwise trajectory ---------------------------------------------------

@dataclass(frozen=True)
class TrajectoryRow:
    L: int
    beta_L: float
    count: int
    normalized: float
    inner_bracket: int
    outer_bracket: int
    outer_expected: float
    sigma_exact: float
    sigma_bound: float
    sandwich_ok: bool
    perturbed: bool

    @property
    def outer_normalized(self) -> float:
        return self.outer_bracket / self.beta_L

    @property
    def inner_normalized(self) -> float:
        return self.inner_bracket / self.beta_L


def pointwise_trajectory(params_list, E: float, master_seed: int = 0, realization_index: int = 0,
                         force: bool = False) -> list[TrajectoryRow]:
    """One disorder path evaluated on growing boxes.

    The returned sigmas are for the outer bracket count (a sum of
    independent indicators): ``sigma_exact`` from its exact variance,
    ``sigma_bound`` from the cruder bound variance <= mean; both divided by
    beta_L.
    """
    params_list = list(params_list)
    if not params_list:
        raise ValueError("empty parameter list")
    for p in params_list:
        if not p.almost_sure_regime:
            if not force:
                raise RegimeViolation(f"{p} is outside the almost-sure regime")
            warnings.warn(f"{p} is outside the almost-sure regime; continuing as forced", stacklevel=2)
    out = []
    for p in params_list:
        kind = kind_for_energy(p, E)
        rc = realization_counts(p, master_seed, ((E, 1 if kind == "leq" else -1),), realization_index)
        beta = beta_L(p)
        if kind == "leq":
            count, inner, outer = rc.leq(0), int(rc.bracket_plus_leq[0]), int(rc.bracket_minus_leq[0])
        else:
            count, inner, outer = rc.geq(0), int(rc.bracket_minus_geq[0]), int(rc.bracket_plus_geq[0])
        c = bracket_threshold(p, E, -1 if kind == "leq" else +1, kind)
        prob, sizes = site_tail_probabilities(p, c)
        mean = float(np.sum(sizes * prob))
        var = float(np.sum(sizes * prob * (1 - prob)))
        out.append(TrajectoryRow(
            L=p.L,
            beta_L=beta,
            count=count,
            normalized=count / beta,
            inner_bracket=inner,
            outer_bracket=outer,
            outer_expected=mean / beta,
            sigma_exact=math.sqrt(var) / beta,
            sigma_bound=math.sqrt(mean) / beta,
            sandwich_ok=inner <= count <= outer,
            perturbed=bool(rc.perturbed[0]),
        ))
    return out


# -- divergence of the a_n-support sums -------------------------------------

@dataclass
class DivergenceReport:
    x: float
    eps: float
    L_list: list
    sums: list
    increasing: bool
    ratio: float
    factor: float

    @property
    def passed(self) -> bool:
        return self.increasing and self.ratio > self.factor

    def to_dict(self) -> dict:
        return {
            "x": self.x, "eps": self.eps, "L_list": self.L_list, "sums": self.sums,
            "increasing": self.increasing, "ratio": self.ratio, "factor": self.factor,
            "passed": self.passed,
        }


def window_mass_sum(params: ModelParams, x: float, eps: float) -> float:
    """Sum over Lambda_L of mu(a_n^-1 (x - eps, x + eps))."""
    a = shell_envelope(params.L, params.alpha)
    sizes = shell_sizes(params.d, params.L)
    mass = cdf((x + eps) / a, params.delta) - cdf((x - eps) / a, params.delta)
    return float(np.sum(sizes * mass))


def divergence_diagnostic(params: ModelParams, x: float, eps: float, L_list, factor: float = 2.0) -> DivergenceReport:
    if not eps > 0:
        raise ValueError("eps must be positive")
    L_list = [int(L) for L in L_list]
    sums = [window_mass_sum(params.with_L(L), x, eps) for L in L_list]
    increasing = all(b > a for a, b in zip(sums, sums[1:]))
    ratio = sums[-1] / sums[0] if sums[0] > 0 else math.inf
    return DivergenceReport(float(x), float(eps), L_list, sums, increasing, ratio, factor)


# -- verification reports ---------------------------------------------------

@dataclass
class Bound:
    name: str
    value: float
    formula: str


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    claim: str
    params: dict
    quantities: dict = field(default_factory=dict)
    bounds: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    runtime: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(passed), detail))
        return bool(passed)

    def bound(self, name: str, value: float, formula: str) -> float:
        self.bounds.append(Bound(name, float(value), formula))
        return value

    def finish(self) -> "VerificationReport":
        self.runtime = time.perf_counter() - self._t0
        return self

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "params": self.params,
            "quantities": self.quantities,
            "bounds": [b.__dict__ for b in self.bounds],
            "checks": [c.__dict__ for c in self.checks],
            "passed": self.passed,
            "runtime": self.runtime,
        }
