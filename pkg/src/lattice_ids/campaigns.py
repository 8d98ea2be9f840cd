"""Verification campaigns: run an estimator, compare against closed forms, collect checks.

Each campaign returns ``(report, header, rows)``; rows are the tabular data
the CLI writes as CSV.
"""

from __future__ import annotations

import math

import numpy as np

from .estimators import (
    SIGMA_WINDOW,
    Interval,
    VerificationReport,
    divergence_diagnostic,
    expected_diag_tail,
    gamma_measure,
    interior_fraction,
    kind_for_energy,
    mc_expected_count,
    nontrivial_constant,
    pointwise_bounds,
    pointwise_trajectory,
    vague_bound,
    variance_excess,
)
from .model import ModelParams, beta_L, cdf, sample_q
from .operator import realization_stream

TRIAL_HEADER = ["realization_index", "E_or_interval", "count", "normalized"]


def dkw_bound(n: int, confidence_miss: float = 1e-6) -> float:
    """Sup-distance exceeded with probability at most ``confidence_miss``."""
    return math.sqrt(math.log(2 / confidence_miss) / (2 * n))


def ecdf_sup_distance(draws, delta: float) -> float:
    x = np.sort(np.asarray(draws, float))
    n = x.size
    F = cdf(x, delta)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def sample_campaign(delta: float, count: int, seed: int):
    rep = VerificationReport("sampler", {"delta": delta, "count": count, "seed": seed})
    draws = sample_q(realization_stream(seed, 0), delta, size=count)
    dist = ecdf_sup_distance(draws, delta)
    bound = rep.bound("dkw", dkw_bound(count), "sqrt(ln(2/1e-6)/(2n))")
    inside = int(np.count_nonzero(np.abs(draws) < 1))
    rep.quantities.update({"sup_distance": dist, "draws_inside_unit": inside})
    rep.check("ecdf_sup_distance", dist < bound, f"{dist:.6g} < {bound:.6g}")
    rep.check("support", inside == 0, f"{inside} draws with |q| < 1")
    rows = [[i, float(q)] for i, q in enumerate(draws)]
    return rep.finish(), ["index", "q"], rows


def _trial_rows(report, label):
    raw = report.raw
    beta = raw.get("beta_L")
    rows = []
    for i, c in zip(raw["index"], raw["count"]):
        norm = c / beta if beta else c / report.params.volume
        rows.append([int(i), label, int(c), float(norm)])
    return rows


def simulate_campaign(params: ModelParams, energies, trials: int, seed: int, jobs: int = 1):
    rep = VerificationReport("simulate", params.to_dict())
    rows = []
    for E in energies:
        r = mc_expected_count(params, E, trials=trials, master_seed=seed, jobs=jobs)
        rep.quantities[f"E={E:.15g}"] = r.to_dict()
        rep.check(f"sandwich E={E:.15g}", r.details["sandwich_violations"] == 0,
                  f"{r.details['sandwich_violations']} violations")
        rows += _trial_rows(r, f"{E:.15g}")
    return rep.finish(), TRIAL_HEADER, rows


def mean_count_campaign(params: ModelParams, E: float, trials: int, seed: int, jobs: int = 1):
    """Averaged-count window at E outside the band, plus closed-form bracket checks."""
    rep = VerificationReport("mean-count-window", params.to_dict())
    r = mc_expected_count(params, E, trials=trials, master_seed=seed, jobs=jobs)
    lo, hi = r.limit_bounds
    eps = abs(E) - 2 * params.d
    rep.bound("lower", lo, f"0.5*(4d+eps)^(1-delta), eps={eps:.15g}")
    rep.bound("upper", hi, f"0.5*eps^(1-delta), eps={eps:.15g}")
    rep.quantities.update(r.to_dict())
    k = SIGMA_WINDOW
    rep.check("window", r.within(lo, hi, k),
              f"{r.estimate:.6g} in [{lo:.6g}, {hi:.6g}] +- {k}*{r.stderr:.3g}")
    for name in ("inner_bracket", "outer_bracket"):
        b = r.details[name]
        rep.check(f"{name}_closed_form", b["z"] <= k, f"z={b['z']:.3g}")
    rep.check("sandwich", r.details["sandwich_violations"] == 0,
              f"{r.details['sandwich_violations']} violations")
    return rep.finish(), TRIAL_HEADER, _trial_rows(r, f"{E:.15g}")


TRAJECTORY_HEADER = ["L", "beta_L", "count", "normalized", "inner_bracket", "outer_bracket",
                     "outer_normalized", "outer_expected", "sigma_exact", "sigma_bound", "sandwich_ok"]


def trajectory_rows(rows):
    return [[r.L, r.beta_L, r.count, r.normalized, r.inner_bracket, r.outer_bracket,
             r.outer_normalized, r.outer_expected, r.sigma_exact, r.sigma_bound, int(r.sandwich_ok)]
            for r in rows]


def pointwise_campaign(params: ModelParams, ladder, E: float, seed: int, realization: int = 0,
                       force: bool = False, sigmas: float = 3.0):
    """One disorder path on a ladder of boxes."""
    plist = [params.with_L(L) for L in ladder]
    rep = VerificationReport("pointwise-trajectory", {**params.to_dict(), "L_ladder": list(ladder)})
    # --force lets the computation run; the check still reports the true regime
    rep.check("regime", all(p.almost_sure_regime for p in plist),
              "d>=2, 0<alpha<1/2, 1<delta<1/(2 alpha)")
    traj = pointwise_trajectory(plist, E, seed, realization, force=force)
    lo, hi = pointwise_bounds(params, E)
    rep.bound("lower", lo, "0.5*(2d-E)^(1-delta) for E<-2d; 0.5*(2d+E)^(1-delta) for E>2d")
    rep.bound("upper", hi, "0.5*(-2d-E)^(1-delta) for E<-2d; 0.5*(E-2d)^(1-delta) for E>2d")
    rep.check("sandwich", all(r.sandwich_ok for r in traj))
    for r in traj:
        z = abs(r.outer_normalized - r.outer_expected) / r.sigma_exact
        rep.check(f"outer_bracket L={r.L}", z <= sigmas, f"z={z:.3g} (<= {sigmas})")
    steps = [abs(b.normalized - a.normalized) for a, b in zip(traj, traj[1:])]
    rep.quantities["fluctuations"] = steps
    rep.check("fluctuation_nonincreasing", all(b <= a for a, b in zip(steps, steps[1:])),
              ", ".join(f"{s:.4g}" for s in steps))
    return rep.finish(), TRAJECTORY_HEADER, trajectory_rows(traj)


INTERIOR_HEADER = ["L", "volume", "beta_L", "estimate", "stderr", "envelope_lower", "envelope_upper"]


def interior_campaign(params: ModelParams, ladder, M1: float, M2: float, trials: int, seed: int,
                      jobs: int = 1):
    """Interior fraction against its bracket envelope along a ladder of L."""
    rep = VerificationReport("interior-fraction", {**params.to_dict(), "L_ladder": list(ladder), "M1": M1, "M2": M2})
    rows = []
    lowers = []
    for L in ladder:
        p = params.with_L(L)
        r = interior_fraction(p, M1, M2, trials, seed, jobs)
        elo, ehi = r.details["envelope"]
        lowers.append(elo)
        rep.bound(f"envelope_lower L={L}", elo, "1-(T(-2d-M1)+T(M2-2d))/(2L+1)^d, T=expected_diag_tail")
        rep.bound(f"envelope_upper L={L}", ehi, "1-(T(2d-M1)+T(M2+2d))/(2L+1)^d, T=expected_diag_tail")
        rep.check(f"envelope L={L}", r.within(elo, ehi), f"{r.estimate:.6g} in [{elo:.6g}, {ehi:.6g}]")
        rep.check(f"partition L={L}", r.details["partition_failures"] == 0)
        rows.append([L, p.volume, r.details["beta_L"], r.estimate, r.stderr, elo, ehi])
    rep.check("envelope_lower_increasing", all(b > a for a, b in zip(lowers, lowers[1:])))
    return rep.finish(), INTERIOR_HEADER, rows


def default_gamma_intervals(params: ModelParams, M1: float, M2: float):
    two_d = 2 * params.d
    return [
        (Interval(-math.inf, M1, False, True), Interval(M2, math.inf, True, False)),
        Interval(-two_d - (2 * two_d + 2), -two_d - 1),
    ]


def gamma_campaign(params: ModelParams, M1: float, M2: float, trials: int, seed: int,
                   intervals=None, jobs: int = 1):
    """gamma_L tail mass against the vague bound; bounded intervals against C_J."""
    intervals = intervals or default_gamma_intervals(params, M1, M2)
    rep = VerificationReport("gamma-bounds", {**params.to_dict(), "M1": M1, "M2": M2})
    g = gamma_measure(params, intervals, trials, seed, jobs)
    rep.quantities.update(g.to_dict())
    rows = []
    k = SIGMA_WINDOW
    for union, m, s in zip(g.intervals, g.masses, g.stderrs):
        label = " U ".join(str(iv) for iv in union)
        rows.append([label, m, s])
        bounded = [iv for iv in union if math.isfinite(iv.lo) and math.isfinite(iv.hi)]
        if len(union) == 2 and not bounded:
            vb = rep.bound(f"vague {label}", vague_bound(params, M1, M2),
                           "0.5*((-2d-M1)^(1-delta)+(M2-2d)^(1-delta))")
            rep.check(f"vague {label}", m <= vb + k * s, f"{m:.6g} <= {vb:.6g} + {k}*{s:.3g}")
        elif len(union) == 1 and bounded:
            iv = bounded[0]
            C = rep.bound(f"C_J {label}", nontrivial_constant(params, iv.lo, iv.hi),
                          "0.5*((4d+eps_near)^(1-delta)-eps_far^(1-delta))")
            if iv.hi - iv.lo > 4 * params.d:
                rep.check(f"C_J positive {label}", C > 0)
            rep.check(f"nontrivial {label}", m >= C - k * s, f"{m:.6g} >= {C:.6g} - {k}*{s:.3g}")
    return rep.finish(), ["interval", "mass", "stderr"], rows


def divergence_campaign(params: ModelParams, x: float, eps: float, ladder, factor: float = 2.0):
    rep = VerificationReport("divergence", {**params.to_dict(), "x": x, "eps": eps, "L_ladder": list(ladder)})
    r = divergence_diagnostic(params, x, eps, ladder, factor)
    rep.quantities.update(r.to_dict())
    rep.check("increasing", r.increasing)
    rep.check("growth", r.ratio > factor, f"last/first={r.ratio:.6g} > {factor}")
    rows = [[L, params.with_L(L).volume, beta_L(params.with_L(L)), s] for L, s in zip(r.L_list, r.sums)]
    return rep.finish(), ["L", "volume", "beta_L", "partial_sum"], rows


SWEEP_HEADER = ["L", "beta_L", "estimate", "stderr", "lower", "upper", "envelope_lower", "envelope_upper"]


def sweep_campaign(params: ModelParams, ladder, quantity: str, trials: int, seed: int, E=None,
                   M1=None, M2=None, realization: int = 0, force: bool = False, jobs: int = 1):
    """One row per L for the chosen quantity ('mean-count', 'interior', 'pointwise')."""
    rep = VerificationReport(f"sweep:{quantity}", {**params.to_dict(), "L_ladder": list(ladder)})
    rows = []
    if quantity == "mean-count":
        E = -(2 * params.d + 1) if E is None else E
        for L in ladder:
            p = params.with_L(L)
            r = mc_expected_count(p, E, trials=trials, master_seed=seed, jobs=jobs)
            lo, hi = r.limit_bounds
            elo, ehi = r.details["closed_form_window"]
            rep.check(f"sandwich L={L}", r.details["sandwich_violations"] == 0)
            rep.check(f"window L={L}", r.within(lo, hi))
            rows.append([L, r.details["beta_L"], r.estimate, r.stderr, lo, hi, elo, ehi])
    elif quantity == "interior":
        M1 = -(2 * params.d + 1) if M1 is None else M1
        M2 = 2 * params.d + 1 if M2 is None else M2
        for L in ladder:
            p = params.with_L(L)
            r = interior_fraction(p, M1, M2, trials, seed, jobs)
            elo, ehi = r.details["envelope"]
            rep.check(f"envelope L={L}", r.within(elo, ehi))
            rows.append([L, r.details["beta_L"], r.estimate, r.stderr, 0.0, 1.0, elo, ehi])
        est = [row[2] for row in rows]
        rep.quantities["interior_increasing"] = all(b > a for a, b in zip(est, est[1:]))
    elif quantity == "pointwise":
        E = -(2 * params.d + 1) if E is None else E
        traj = pointwise_trajectory([params.with_L(L) for L in ladder], E, seed, realization, force=force)
        lo, hi = pointwise_bounds(params, E)
        for r in traj:
            rep.check(f"sandwich L={r.L}", r.sandwich_ok)
            rows.append([r.L, r.beta_L, r.normalized, r.sigma_exact, lo, hi,
                         r.inner_normalized, r.outer_normalized])
    else:
        raise ValueError(f"unknown sweep quantity {quantity!r}")
    return rep.finish(), SWEEP_HEADER, rows


def variance_check(params: ModelParams, E: float, trials: int, seed: int, jobs: int = 1) -> tuple[float, float]:
    """Outer-bracket count: (variance - mean, jackknife stderr)."""
    r = mc_expected_count(params, E, kind_for_energy(params, E), trials, seed, jobs)
    return variance_excess(r.raw["outer"])


__all__ = [
    "sample_campaign", "simulate_campaign", "mean_count_campaign", "pointwise_campaign",
    "interior_campaign", "gamma_campaign", "divergence_campaign", "sweep_campaign",
    "variance_check", "dkw_bound", "ecdf_sup_distance", "expected_diag_tail",
]
