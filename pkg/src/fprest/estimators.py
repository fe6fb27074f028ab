"""Point estimators for the mean outcome of the treated group."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numba
import numpy as np

from .dataset import ObservationalDataset
from .models import (
    FitConfig,
    FittedLogit,
    fit_outcome,
    fit_propensity,
    nonrespondent_weights,
)

Z95 = 1.96

_RECOVERABLE = (ValueError, ArithmeticError, np.linalg.LinAlgError)


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class EstimatorId:
    kind: str
    k: int | None = None

    KINDS = ("PSM", "OSM", "IPW_NR", "MPO", "WMPO")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind in ("PSM", "OSM"):
            if self.k is None or self.k < 1:
                raise ValueError(f"{self.kind} needs k >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.kind} takes no k")

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.k}NN" if self.k is not None else self.kind

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, text: str) -> "EstimatorId":
        text = text.strip().upper()
        m = re.fullmatch(r"(PSM|OSM)_(\d+)NN", text)
        if m:
            return cls(m.group(1), int(m.group(2)))
        if text == "IPW":
            text = "IPW_NR"
        return cls(text)


PSM_1NN = EstimatorId("PSM", 1)
OSM_1NN = EstimatorId("OSM", 1)
OSM_10NN = EstimatorId("OSM", 10)
IPW_NR = EstimatorId("IPW_NR")
MPO = EstimatorId("MPO")
WMPO = EstimatorId("WMPO")
DEFAULT_ESTIMATORS = (PSM_1NN, OSM_1NN, OSM_10NN, IPW_NR, MPO, WMPO)


def ci95(point: float, se: float) -> tuple[float, float]:
    """Normal-approximation 95% interval, deliberately not clipped to [0, 1]."""
    if se < 0:
        raise ValueError("se must be non-negative")
    return point - Z95 * se, point + Z95 * se


@dataclass(frozen=True)
class EstimateResult:
    estimator: EstimatorId
    point: float
    se: float | None = None
    ci95: tuple[float, float] | None = None

    def with_se(self, se: float) -> "EstimateResult":
        return EstimateResult(self.estimator, self.point, se, ci95(self.point, se))

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator.name,
            "point": self.point,
            "se": self.se,
            "ci95": list(self.ci95) if self.ci95 is not None else None,
        }


@dataclass(frozen=True)
class EstimatorConfig:
    fit: FitConfig = FitConfig()
    multiset: bool = True

    @property
    def weight_formula(self) -> str:
        return self.fit.weight_formula


# --- matching -------------------------------------------------------------

@numba.njit(cache=True)
def _knn_counts(treated, values, starts, members, k, n_untreated):
    # values: sorted unique untreated scores; members[starts[g]:starts[g+1]] are
    # the untreated indices (ascending) holding values[g].
    counts = np.zeros(n_untreated, dtype=np.int64)
    m = values.shape[0]
    buf = np.empty(n_untreated, dtype=np.int64)
    for i in range(treated.shape[0]):
        t = treated[i]
        g = np.searchsorted(values, t)
        lo = g - 1
        hi = g
        need = k
        while need > 0:
            dl = np.inf
            dr = np.inf
            if lo >= 0:
                dl = abs(t - values[lo])
            if hi < m:
                dr = abs(t - values[hi])
            d = min(dl, dr)
            # gather every group at exactly distance d on either side
            nb = 0
            while lo >= 0 and abs(t - values[lo]) == d:
                for j in range(starts[lo], min(starts[lo + 1], starts[lo] + need)):
                    buf[nb] = members[j]
                    nb += 1
                lo -= 1
            while hi < m and abs(t - values[hi]) == d:
                for j in range(starts[hi], min(starts[hi + 1], starts[hi] + need)):
                    buf[nb] = members[j]
                    nb += 1
                hi += 1
            chosen = np.sort(buf[:nb])
            take = min(need, nb)
            for j in range(take):
                counts[chosen[j]] += 1
            need -= take
    return counts


def match_counts(treated_scores, untreated_scores, k: int) -> np.ndarray:
    """How often each untreated unit is among some treated unit's k nearest.

    Distances are ``|t - s|``; at equal distance the lower untreated index
    wins. Matching is with replacement.
    """
    t = np.ascontiguousarray(treated_scores, dtype=np.float64)
    s = np.ascontiguousarray(untreated_scores, dtype=np.float64)
    if t.size == 0 or s.size == 0:
        raise EstimatorError("matching needs treated and untreated units")
    if k < 1 or k > s.size:
        raise EstimatorError(f"k={k} outside [1, {s.size}] untreated units")
    if not (np.isfinite(t).all() and np.isfinite(s).all()):
        raise EstimatorError("scores must be finite")
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    first = np.ones(s.size, dtype=bool)
    first[1:] = sorted_s[1:] != sorted_s[:-1]
    starts = np.append(np.flatnonzero(first), s.size)
    values = sorted_s[first]
    return _knn_counts(t, values, starts, order.astype(np.int64), k, s.size)


def match_set_knn(treated_scores, untreated_scores, k: int) -> np.ndarray:
    """Sorted indices of the union of every treated unit's k nearest untreated units."""
    return np.flatnonzero(match_counts(treated_scores, untreated_scores, k))


def _matched_mean(dataset, scores, k, multiset):
    y = dataset.outcome[dataset.untreated].astype(np.float64)
    counts = match_counts(scores[dataset.treated], scores[dataset.untreated], k)
    if multiset:
        return float(counts @ y / counts.sum())
    return float(y[counts > 0].mean())


# --- estimators -------------------------------------------------------------

def estimate_psm(dataset: ObservationalDataset, propensity_model: FittedLogit, k: int = 1,
                 multiset: bool = False) -> EstimateResult:
    """Mean observed outcome over the propensity-score match set."""
    dataset.require_both_groups()
    scores = propensity_model.predict(dataset.covariates)
    return EstimateResult(EstimatorId("PSM", k), _matched_mean(dataset, scores, k, multiset))


def estimate_osm(dataset: ObservationalDataset, outcome_model: FittedLogit, k: int = 1,
                 multiset: bool = False) -> EstimateResult:
    """Mean observed outcome over the outcome-score match set."""
    dataset.require_both_groups()
    scores = outcome_model.predict(dataset.covariates)
    return EstimateResult(EstimatorId("OSM", k), _matched_mean(dataset, scores, k, multiset))


def estimate_ipw_nr(dataset: ObservationalDataset, propensity_model: FittedLogit,
                    weight_formula: str = "odds") -> EstimateResult:
    """Weighted (ratio) mean of untreated outcomes, reweighted toward the treated."""
    dataset.require_both_groups()
    mask = dataset.untreated
    pi = propensity_model.predict(dataset.covariates[mask])
    w = nonrespondent_weights(pi, weight_formula)
    total = w.sum()
    if not total > 0:
        raise EstimatorError("total weight is zero")
    y = dataset.outcome[mask].astype(np.float64)
    return EstimateResult(IPW_NR, float(w @ y / total))


def estimate_mpo(dataset: ObservationalDataset, outcome_model: FittedLogit) -> EstimateResult:
    """Average outcome-model prediction over the treated units."""
    if dataset.n_treated == 0:
        raise EstimatorError("no treated units")
    return EstimateResult(MPO, float(outcome_model.predict(dataset.covariates[dataset.treated]).mean()))


def fit_weighted_outcome(dataset, propensity_model, config: FitConfig = FitConfig()):
    pi = propensity_model.predict(dataset.covariates[dataset.untreated])
    w = nonrespondent_weights(pi, config.weight_formula)
    return fit_outcome(dataset, unit_weights=w, config=config)


def estimate_wmpo(dataset: ObservationalDataset, propensity_model: FittedLogit,
                  weight_formula: str = "odds", config: FitConfig = FitConfig()) -> EstimateResult:
    """Mean prediction of an outcome model fitted with non-respondent weights."""
    if dataset.n_treated == 0:
        raise EstimatorError("no treated units")
    if weight_formula != config.weight_formula:
        config = FitConfig(config.l2_lambda, config.max_iter, config.tol,
                           config.prob_clamp_eps, weight_formula)
    model = fit_weighted_outcome(dataset, propensity_model, config)
    return EstimateResult(WMPO, float(model.predict(dataset.covariates[dataset.treated]).mean()))


@dataclass
class EstimateBatch:
    results: list[EstimateResult] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    def by_name(self) -> dict[str, EstimateResult]:
        return {r.estimator.name: r for r in self.results}


def run_all(dataset: ObservationalDataset, estimators=DEFAULT_ESTIMATORS,
            config: EstimatorConfig = EstimatorConfig()) -> EstimateBatch:
    """Run several estimators, fitting each score model at most once.

    Failures do not propagate: they are collected in ``errors`` keyed by
    estimator name, next to the results that did succeed. Results come back in
    the order of ``estimators``.
    """
    fit = config.fit
    cache: dict[str, object] = {}

    def model(name):
        if name not in cache:
            try:
                if name == "propensity":
                    cache[name] = fit_propensity(dataset, fit)
                elif name == "outcome":
                    cache[name] = fit_outcome(dataset, config=fit)
                else:
                    cache[name] = fit_weighted_outcome(dataset, model("propensity"), fit)
            except _RECOVERABLE as exc:
                cache[name] = exc
        found = cache[name]
        if isinstance(found, Exception):
            raise found
        return found

    batch = EstimateBatch()
    for est in estimators:
        try:
            dataset.require_both_groups()
            if est.kind == "PSM":
                res = estimate_psm(dataset, model("propensity"), est.k, config.multiset)
            elif est.kind == "OSM":
                res = estimate_osm(dataset, model("outcome"), est.k, config.multiset)
            elif est.kind == "IPW_NR":
                res = estimate_ipw_nr(dataset, model("propensity"), fit.weight_formula)
            elif est.kind == "MPO":
                res = estimate_mpo(dataset, model("outcome"))
            else:
                wmodel = model("weighted")
                res = EstimateResult(WMPO, float(wmodel.predict(dataset.covariates[dataset.treated]).mean()))
            batch.results.append(res)
        except _RECOVERABLE as exc:
            batch.errors[est.name] = f"{type(exc).__name__}: {exc}"
    return batch
