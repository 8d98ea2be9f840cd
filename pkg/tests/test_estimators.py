import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_ids.estimators import (
    BadBand,
    EnergyInsideBand,
    Interval,
    RegimeViolation,
    divergence_diagnostic,
    expected_bracket,
    expected_diag_tail,
    gamma_measure,
    interior_envelope,
    interior_fraction,
    jackknife_stderr,
    kind_for_energy,
    mc_expected_count,
    mean_count_bounds,
    mean_stderr,
    nontrivial_constant,
    pointwise_trajectory,
    variance_excess,
    vague_bound,
    window_mass_sum,
)
from lattice_ids.model import ModelParams, beta_L
from lattice_ids.operator import assemble_hamiltonian, sample_disorder

P1 = ModelParams(1, 1, 1.0, 2.0)
P2 = ModelParams(2, 10, 0.5, 2.0)


# -- closed forms -----------------------------------------------------------

def test_diag_tail_examples():
    # a_n = 1 on the whole L = 1 box, so each site contributes (1/2) min(1, 1/c)
    assert expected_diag_tail(P1, 1.0) == pytest.approx(1.5, rel=1e-15)
    assert expected_diag_tail(P1, 2.0) == pytest.approx(0.75, rel=1e-15)


@given(st.integers(1, 3), st.integers(0, 30), st.floats(0.05, 2), st.floats(1.05, 4), st.floats(1, 1e6))
@settings(max_examples=60)
def test_diag_tail_reduces_to_beta_for_large_threshold(d, L, alpha, delta, c):
    # a_n <= 1 <= c, so min(1, (a_n/c)^(delta-1)) is always the second term
    p = ModelParams(d, L, alpha, delta)
    assert expected_diag_tail(p, c) == pytest.approx(0.5 * c ** (1 - delta) * beta_L(p), rel=1e-12)


def test_diag_tail_brute_force_small_threshold():
    p = ModelParams(2, 6, 0.7, 1.6)
    box = sample_disorder(p, 0, 0).box
    a = np.maximum(1, box.sup_norms()) ** -0.7
    c = 0.2
    brute = 0.5 * np.minimum(1, (a / c) ** 0.6).sum()
    assert expected_diag_tail(p, c) == pytest.approx(brute, rel=1e-12)


def test_expected_bracket_values_at_minus_five():
    beta = beta_L(P2)
    assert expected_bracket(P2, -5.0, -1, "leq") / beta == pytest.approx(0.5, rel=1e-12)
    assert expected_bracket(P2, -5.0, +1, "leq") / beta == pytest.approx(1 / 18, rel=1e-12)


def test_expected_bracket_mirror_symmetry():
    for E in (5.0, 7.5, 20.0):
        assert expected_bracket(P2, E, +1, "geq") == pytest.approx(expected_bracket(P2, -E, -1, "leq"), rel=1e-15)
        assert expected_bracket(P2, E, -1, "geq") == pytest.approx(expected_bracket(P2, -E, +1, "leq"), rel=1e-15)


@pytest.mark.parametrize("E, kind", [(-4.0, "leq"), (0.0, "leq"), (4.0, "geq"), (-5.0, "geq")])
def test_energy_inside_band_rejected(E, kind):
    with pytest.raises(EnergyInsideBand):
        expected_bracket(P2, E, -1, kind)


def test_kind_for_energy():
    assert kind_for_energy(P2, -5) == "leq"
    assert kind_for_energy(P2, 5) == "geq"
    with pytest.raises(EnergyInsideBand):
        kind_for_energy(P2, 3.9)


def test_mean_count_bounds_example():
    lo, hi = mean_count_bounds(P2, -5.0)
    assert lo == pytest.approx(1 / 18)
    assert hi == pytest.approx(0.5)
    assert mean_count_bounds(P2, 5.0) == (lo, hi)


def test_vague_and_nontrivial_constants():
    assert vague_bound(P2, -5, 5) == pytest.approx(1.0)
    with pytest.raises(BadBand):
        vague_bound(P2, -3, 5)
    # one-sided interval [-2d - 10, -2d - 1] at d = 2: (1/2)(1/9 - 1/10)
    assert nontrivial_constant(P2, -14, -5) == pytest.approx(1 / 180)
    assert nontrivial_constant(P2, 5, 14) == pytest.approx(1 / 180)
    assert nontrivial_constant(ModelParams(1, 10, 0.5, 2.0), -8, -3) == pytest.approx(1 / 60)
    assert nontrivial_constant(ModelParams(1, 10, 0.5, 2.0), -12, -3) == pytest.approx(1 / 20)
    assert nontrivial_constant(P2, -10, -5) < 0
    with pytest.raises(BadBand):
        nontrivial_constant(P2, -10, 10)


def test_interior_envelope_ordered_and_approaches_one():
    base = ModelParams(2, 5, 0.5, 2.0)
    lows = []
    for L in (5, 10, 20, 40):
        lo, hi = interior_envelope(base.with_L(L), -8, 8)
        assert 0 < lo <= hi <= 1
        lows.append(lo)
    assert all(b > a for a, b in zip(lows, lows[1:]))
    with pytest.raises(BadBand):
        interior_envelope(base, -3, 8)


# -- Monte Carlo ------------------------------------------------------------

def test_mc_deterministic_and_consistent():
    p = ModelParams(2, 4, 0.5, 2.0)
    a = mc_expected_count(p, -5.0, trials=40, master_seed=3)
    b = mc_expected_count(p, -5.0, trials=40, master_seed=3)
    assert a.estimate == b.estimate and a.stderr == b.stderr
    assert np.array_equal(a.raw["count"], b.raw["count"])
    assert a.details["sandwich_violations"] == 0
    assert a.details["kind"] == "leq"
    # oracle: dense eigenvalues of the same realizations
    beta = beta_L(p)
    dense = [np.count_nonzero(np.linalg.eigvalsh(assemble_hamiltonian(sample_disorder(p, 3, i)).to_dense()) <= -5.0)
             for i in range(40)]
    assert np.array_equal(a.raw["count"], dense)
    assert a.estimate == pytest.approx(np.mean(dense) / beta, rel=1e-13)
    assert a.stderr == pytest.approx(np.std(np.array(dense) / beta, ddof=1) / math.sqrt(40), rel=1e-12)


def test_mc_geq_branch():
    p = ModelParams(2, 4, 0.5, 2.0)
    r = mc_expected_count(p, 5.0, trials=20, master_seed=1)
    assert r.details["kind"] == "geq"
    assert r.details["sandwich_violations"] == 0
    with pytest.raises(EnergyInsideBand):
        mc_expected_count(p, 1.0, trials=20)


def test_mc_jobs_do_not_change_result():
    p = ModelParams(2, 3, 0.5, 2.0)
    a = mc_expected_count(p, -5.0, trials=16, master_seed=9, jobs=1)
    b = mc_expected_count(p, -5.0, trials=16, master_seed=9, jobs=2)
    assert np.array_equal(a.raw["count"], b.raw["count"])


def test_mean_stderr_and_jackknife():
    x = np.array([1.0, 2.0, 4.0, 7.0])
    m, s = mean_stderr(x)
    assert m == 3.5
    assert s == pytest.approx(np.std(x, ddof=1) / 2)
    # the jackknife of the mean reproduces the usual standard error
    assert jackknife_stderr(x, np.mean) == pytest.approx(s, rel=1e-12)


def test_variance_excess_for_bracket_counts():
    p = ModelParams(2, 6, 0.5, 2.0)
    r = mc_expected_count(p, -5.0, trials=300, master_seed=2)
    excess, se = variance_excess(r.raw["outer"])
    assert excess <= 4 * se


# -- gamma measure ----------------------------------------------------------

def test_interval_parse_and_overlap():
    a = Interval.parse("[-10,-5]")
    assert (a.lo, a.hi, a.lo_closed, a.hi_closed) == (-10, -5, True, True)
    b = Interval.parse("(-inf,-10]")
    assert not b.lo_closed and b.hi_closed
    assert a.overlaps(b)
    assert not a.overlaps(Interval.parse("(-5,0]"))
    assert str(Interval.parse((-math.inf, 3))) == "(-inf,3]"
    with pytest.raises(ValueError):
        Interval.parse("{1,2}")
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_gamma_whole_line_is_volume_over_beta():
    p = ModelParams(2, 3, 0.5, 2.0)
    g = gamma_measure(p, [(-math.inf, math.inf)], trials=5)
    assert g.masses[0] == pytest.approx(p.volume / beta_L(p), rel=1e-15)
    assert g.stderrs[0] == 0


def test_gamma_matches_dense_oracle_and_is_additive():
    p = ModelParams(2, 3, 0.5, 2.0)
    pieces = ["[-12,-6]", "(-6,-5]", "(-5,0)"]
    g = gamma_measure(p, pieces, trials=30, master_seed=4)
    union = gamma_measure(p, [("[-12,-6]", "(-6,-5]")], trials=30, master_seed=4)
    whole = gamma_measure(p, ["[-12,-5]"], trials=30, master_seed=4)
    assert np.array_equal(g.counts[:, 0] + g.counts[:, 1], union.counts[:, 0])
    assert np.array_equal(whole.counts[:, 0], union.counts[:, 0])
    assert union.masses[0] == pytest.approx(g.masses[0] + g.masses[1], rel=1e-12)
    for t in range(30):
        ev = np.linalg.eigvalsh(assemble_hamiltonian(sample_disorder(p, 4, t)).to_dense())
        assert g.counts[t, 0] == np.count_nonzero((ev >= -12) & (ev <= -6))
        assert g.counts[t, 1] == np.count_nonzero((ev > -6) & (ev <= -5))
        assert g.counts[t, 2] == np.count_nonzero((ev > -5) & (ev < 0))


def test_gamma_rejects_overlap():
    with pytest.raises(ValueError):
        gamma_measure(P2.with_L(2), [("[-10,-5]", "[-5,-4.5]")], trials=2)
    # separate entries may overlap
    g = gamma_measure(P2.with_L(2), ["[-10,-5]", "[-6,-4.5]"], trials=2)
    assert len(g.masses) == 2


# -- interior fraction ------------------------------------------------------

def test_interior_fraction_partition_and_envelope():
    p = ModelParams(2, 5, 0.5, 2.0)
    r = interior_fraction(p, -8.0, 8.0, trials=60, master_seed=0)
    assert r.details["partition_failures"] == 0
    lo, hi = r.details["envelope"]
    assert r.within(lo, hi)
    below, above = r.raw["below"], r.raw["above"]
    assert np.array_equal(r.raw["count"], p.volume - below - above)


# -- pointwise trajectory ---------------------------------------------------

def test_trajectory_restriction_and_regime():
    base = ModelParams(2, 5, 0.4, 1.2)
    rows = pointwise_trajectory([base.with_L(L) for L in (3, 6, 12)], -5.0, 0, 0)
    assert [r.L for r in rows] == [3, 6, 12]
    assert all(r.sandwich_ok for r in rows)
    # the same disorder path restricted: bracket counts can only grow with the box
    assert all(b.outer_bracket >= a.outer_bracket for a, b in zip(rows, rows[1:]))
    for r in rows:
        assert r.sigma_exact <= r.sigma_bound
    with pytest.raises(RegimeViolation):
        pointwise_trajectory([P2], -5.0)
    with pytest.warns(UserWarning):
        out = pointwise_trajectory([P2.with_L(3)], -5.0, force=True)
    assert out[0].sandwich_ok


# -- window mass sums -------------------------------------------------------

@pytest.mark.parametrize("eps", [1.0, 2.0, 5.0])
def test_window_mass_at_zero_closed_form(eps):
    # a_n^-1 (-eps, eps) has mass 1 - (a_n/eps)^(delta - 1) when eps >= 1
    for L in (0, 3, 17):
        p = ModelParams(2, L, 0.5, 1.7)
        assert window_mass_sum(p, 0.0, eps) == pytest.approx(p.volume - beta_L(p) * eps ** (1 - p.delta), rel=1e-12)


def test_window_mass_monotone_in_eps_and_divergent():
    p = ModelParams(2, 10, 0.5, 2.0)
    sums = [window_mass_sum(p, 0.5, e) for e in (0.1, 0.5, 1.0, 3.0)]
    assert all(b >= a for a, b in zip(sums, sums[1:]))
    rep = divergence_diagnostic(p, 0.5, 0.25, [5, 10, 20, 40])
    assert rep.increasing and rep.ratio > 2 and rep.passed
    with pytest.raises(ValueError):
        divergence_diagnostic(p, 0.5, 0.0, [5, 10])
