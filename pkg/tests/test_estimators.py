import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fprest.dataset import ObservationalDataset
from fprest.estimators import (
    DEFAULT_ESTIMATORS,
    IPW_NR,
    MPO,
    WMPO,
    EstimatorConfig,
    EstimatorError,
    EstimatorId,
    ci95,
    estimate_ipw_nr,
    estimate_mpo,
    estimate_osm,
    estimate_psm,
    estimate_wmpo,
    match_counts,
    match_set_knn,
    run_all,
)
from fprest.models import FitConfig, fit_outcome, fit_propensity
from fprest.simgen import SimDesignConfig, generate_design


class ScoreStub:
    """Stands in for a fitted model: the score is the first covariate."""

    def predict(self, X):
        return np.asarray(X, dtype=float)[:, 0]


def brute_force_knn(t, s, k):
    """Reference: every pair's distance, ranked by (distance, index)."""
    counts = np.zeros(len(s), dtype=np.int64)
    idx = np.arange(len(s))
    for ti in t:
        d = np.abs(ti - np.asarray(s))
        counts[np.lexsort((idx, d))[:k]] += 1
    return counts


def scored(untreated, y_untreated, treated, y_treated=None):
    """Dataset whose only covariate is the score."""
    x = np.r_[untreated, treated]
    W = np.r_[np.zeros(len(untreated)), np.ones(len(treated))].astype(int)
    yt = np.full(len(treated), np.nan) if y_treated is None else np.asarray(y_treated, float)
    return ObservationalDataset(x[:, None], W, np.r_[np.asarray(y_untreated, float), yt])


# -- matching kernel ----------------------------------------------------------

def test_nearest_by_absolute_difference():
    assert list(match_set_knn([0.5], [0.1, 0.4, 0.9], 1)) == [1]


def test_distance_tie_goes_to_lower_index():
    assert list(match_set_knn([0.5], [0.4, 0.6], 1)) == [0]
    assert list(match_set_knn([0.5], [0.6, 0.4], 1)) == [0]


def test_union_over_treated():
    assert list(match_set_knn([0.1, 0.9], [0.0, 0.2, 0.8, 1.0], 2)) == [0, 1, 2, 3]


def test_k_too_large():
    with pytest.raises(EstimatorError):
        match_set_knn([0.1], [0.0, 0.2], 3)
    with pytest.raises(EstimatorError):
        match_set_knn([], [0.0], 1)


def test_counts_track_reuse():
    np.testing.assert_array_equal(match_counts([0.1, 0.11, 0.9], [0.1, 0.5, 0.9], 1), [2, 0, 1])


score_lists = st.lists(st.integers(-20, 20), min_size=1, max_size=30)


@settings(max_examples=300, deadline=None)
@given(score_lists, score_lists, st.integers(1, 30), st.integers(0, 2))
def test_kernel_matches_brute_force(ti, si, k, grain):
    # coarse integer grids force plenty of exact distance ties
    scale = (1.0, 0.25, 0.013)[grain]
    t = np.array(ti) * scale
    s = np.array(si) * scale
    k = min(k, len(s))
    np.testing.assert_array_equal(match_counts(t, s, k), brute_force_knn(t, s, k))


@settings(max_examples=150, deadline=None)
@given(score_lists, score_lists, st.integers(1, 5), st.integers(-64, 64))
def test_shifting_all_scores_keeps_match_sets(ti, si, k, shift):
    # dyadic grid keeps the shifted distances exact
    t, s = np.array(ti) / 8.0, np.array(si) / 8.0
    k = min(k, len(s))
    a = match_counts(t, s, k)
    b = match_counts(t + shift / 4.0, s + shift / 4.0, k)
    np.testing.assert_array_equal(a, b)


# -- matching estimators ------------------------------------------------------

def test_psm_all_zero_outcomes():
    ds = scored([0.1, 0.5, 0.9], [0, 0, 0], [0.2, 0.3])
    assert estimate_psm(ds, ScoreStub()).point == 0.0


def test_psm_hand_matched():
    ds = scored([0.2, 0.8], [0, 1], [0.79, 0.81])
    assert estimate_psm(ds, ScoreStub(), 1).point == 1.0
    assert estimate_psm(ds, ScoreStub(), 1, multiset=True).point == 1.0


def test_psm_identical_scores():
    rng = np.random.default_rng(0)
    s = rng.random(8)
    y = rng.integers(0, 2, 8)
    ds = scored(s, y, s)
    matched = brute_force_knn(s, s, 1) > 0
    assert estimate_psm(ds, ScoreStub(), 1).point == pytest.approx(y[matched].mean())


def test_set_and_multiset_averages_differ():
    # two treated units pick untreated 0, one picks untreated 2
    ds = scored([0.1, 0.5, 0.9], [1, 0, 0], [0.1, 0.12, 0.88])
    assert estimate_osm(ds, ScoreStub(), 1).point == pytest.approx(0.5)
    assert estimate_osm(ds, ScoreStub(), 1, multiset=True).point == pytest.approx(2 / 3)


def test_osm_k_saturates_to_untreated_mean():
    rng = np.random.default_rng(1)
    s, y = rng.random(12), rng.integers(0, 2, 12)
    ds = scored(s, y, rng.random(5))
    for multiset in (False, True):
        assert estimate_osm(ds, ScoreStub(), 12, multiset).point == pytest.approx(y.mean())


def test_osm_perfect_outcome_scores():
    # scores are the true outcome probabilities; every treated unit is truly 1
    ds = scored([0.0, 0.0, 1.0, 0.0], [0, 0, 1, 0], [1.0, 1.0], [1, 1])
    assert estimate_osm(ds.masked(), ScoreStub(), 1).point == 1.0


def test_osm_single_treated_k3():
    ds = scored([0.0, 0.45, 0.5, 0.55, 1.0], [0, 1, 0, 1, 0], [0.5])
    assert estimate_osm(ds, ScoreStub(), 3).point == pytest.approx(2 / 3)


# -- IPW ----------------------------------------------------------------------

class ConstantPropensity:
    def __init__(self, c):
        self.c = c

    def predict(self, X):
        return np.full(len(X), self.c)


def test_ipw_hand_computed():
    ds = scored([0.8, 0.2], [1, 0], [0.5])
    assert estimate_ipw_nr(ds, ScoreStub(), "odds").point == pytest.approx(4 / 4.25)
    assert estimate_ipw_nr(ds, ScoreStub(), "paper").point == pytest.approx(0.25 / 4.25)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.lists(st.integers(0, 1), min_size=2, max_size=60),
       st.sampled_from(("odds", "paper")))
def test_ipw_constant_propensity_cancels(c, ys, formula):
    y = np.array(ys)
    ds = scored(np.zeros(len(y)), y, [0.0])
    got = estimate_ipw_nr(ds, ConstantPropensity(c), formula).point
    assert abs(got - y.mean()) <= 1e-12


# -- model-based estimators ---------------------------------------------------

def test_mpo_intercept_only_base_rate():
    rng = np.random.default_rng(2)
    n = 5000
    W = (rng.random(n) < 0.5).astype(int)
    Y = (rng.random(n) < 0.3).astype(float)
    ds = ObservationalDataset(rng.normal(size=(n, 2)), W, Y).masked()
    assert estimate_mpo(ds, fit_outcome(ds)).point == pytest.approx(0.3, abs=0.02)


def test_mpo_single_treated_unit():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 2))
    Y = (X[:, 0] > 0).astype(float)
    W = np.zeros(50, dtype=int)
    W[17] = 1
    ds = ObservationalDataset(X, W, Y).masked()
    m = fit_outcome(ds)
    assert estimate_mpo(ds, m).point == m.predict(X[17:18])[0]


def test_mpo_treated_copy_of_untreated():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    X = np.vstack([X, X[[5, 5, 5]]])
    W = np.r_[np.zeros(30), np.ones(3)].astype(int)
    Y = np.r_[(X[:30, 1] > 0), np.full(3, np.nan)].astype(float)
    ds = ObservationalDataset(X, W, Y)
    m = fit_outcome(ds)
    assert estimate_mpo(ds, m).point == pytest.approx(m.predict(X[5:6])[0], rel=1e-15)


def test_wmpo_close_to_mpo_under_random_assignment():
    rng = np.random.default_rng(5)
    n = 10_000
    X = rng.normal(size=(n, 3))
    W = (rng.random(n) < 0.3).astype(int)
    Y = (X @ [0.6, 0.3, 0.2] + rng.normal(size=n) > 0).astype(float)
    ds = ObservationalDataset(X, W, Y).masked()
    prop = fit_propensity(ds)
    mpo = estimate_mpo(ds, fit_outcome(ds)).point
    assert abs(estimate_wmpo(ds, prop).point - mpo) <= 0.02


def test_wmpo_weight_formula_golden():
    ds, _ = generate_design(SimDesignConfig(1, 2000, seed=11))
    ds = ds.masked()
    prop = fit_propensity(ds)
    odds = estimate_wmpo(ds, prop, "odds").point
    paper = estimate_wmpo(ds, prop, "paper").point
    assert odds != paper
    assert odds == pytest.approx(0.8999096518596473, abs=1e-12)
    assert paper == pytest.approx(0.9810194971367838, abs=1e-12)


def test_wmpo_all_zero_outcomes_errors():
    ds = scored([0.1, 0.2, 0.3], [0, 0, 0], [0.4])
    with pytest.raises(Exception):
        estimate_wmpo(ds, ConstantPropensity(0.5))


# -- run_all ------------------------------------------------------------------

def test_run_all_design_sample():
    ds, _ = generate_design(SimDesignConfig(1, 10_000, seed=0))
    batch = run_all(ds.masked())
    assert [r.estimator for r in batch.results] == list(DEFAULT_ESTIMATORS)
    assert not batch.errors
    for r in batch.results:
        assert np.isfinite(r.point) and 0.0 <= r.point <= 1.0


def test_run_all_zero_untreated_outcomes():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 2))
    W = (X[:, 0] > 0.3).astype(int)
    Y = np.where(W == 1, np.nan, 0.0)
    batch = run_all(ObservationalDataset(X, W, Y))
    got = batch.by_name()
    assert set(batch.errors) == {"OSM_1NN", "OSM_10NN", "MPO", "WMPO"}
    assert got["PSM_1NN"].point == 0.0 and got["IPW_NR"].point == 0.0


def test_run_all_json_deterministic():
    ds, _ = generate_design(SimDesignConfig(2, 3000, seed=4))
    docs = [json.dumps([r.to_dict() for r in run_all(ds.masked()).results]) for _ in range(2)]
    assert docs[0] == docs[1]


def test_run_all_respects_config():
    ds, _ = generate_design(SimDesignConfig(1, 3000, seed=8))
    ds = ds.masked()
    a = run_all(ds, (IPW_NR,), EstimatorConfig(FitConfig(weight_formula="odds"))).results[0]
    b = run_all(ds, (IPW_NR,), EstimatorConfig(FitConfig(weight_formula="paper"))).results[0]
    assert a.point != b.point


# -- ids and intervals --------------------------------------------------------

def test_estimator_ids():
    assert [e.name for e in DEFAULT_ESTIMATORS] == [
        "PSM_1NN", "OSM_1NN", "OSM_10NN", "IPW_NR", "MPO", "WMPO"]
    assert EstimatorId.parse("osm_10nn") == EstimatorId("OSM", 10)
    assert EstimatorId.parse("IPW") == IPW_NR
    assert EstimatorId.parse("mpo") == MPO and EstimatorId.parse("WMPO") == WMPO
    with pytest.raises(ValueError):
        EstimatorId.parse("OSM_0NN")
    with pytest.raises(ValueError):
        EstimatorId.parse("DR")


@pytest.mark.parametrize("point, se, expected", [
    (0.5, 0.1, (0.304, 0.696)), (0.2, 0.0, (0.2, 0.2)), (0.01, 0.02, (-0.0292, 0.0492))])
def test_ci95(point, se, expected):
    lo, hi = ci95(point, se)
    assert lo == pytest.approx(expected[0], abs=1e-15)
    assert hi == pytest.approx(expected[1], abs=1e-15)


def test_ci95_negative_se():
    with pytest.raises(ValueError):
        ci95(0.5, -0.1)
