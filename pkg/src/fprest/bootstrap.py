"""Bootstrap standard errors and the CI coverage experiment."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._parallel import parallel_map
from .dataset import GroundTruth, ObservationalDataset
from .estimators import (
    DEFAULT_ESTIMATORS,
    EstimateResult,
    EstimatorConfig,
    EstimatorId,
    ci95,
    run_all,
)


class BootstrapError(ValueError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    n_replicates: int = 100
    seed: int = 0
    max_redraws: int = 10

    def __post_init__(self):
        if self.n_replicates < 2:
            raise ValueError("n_replicates must be at least 2")
        if self.max_redraws < 0:
            raise ValueError("max_redraws must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class BootstrapEstimate:
    estimator: EstimatorId
    point: float
    se: float
    n_completed: int
    n_skipped: int

    @property
    def ci95(self) -> tuple[float, float]:
        return ci95(self.point, self.se)

    def result(self) -> EstimateResult:
        return EstimateResult(self.estimator, self.point, self.se, self.ci95)


def resample_indices(n: int, seed: int, replicate: int, attempt: int = 0) -> np.ndarray:
    """Row indices for one resample; the stream depends only on its arguments."""
    rng = np.random.default_rng([seed, replicate, attempt])
    return rng.integers(0, n, size=n)


def bootstrap_statistic(n: int, statistic: Callable[[np.ndarray], float],
                        config: BootstrapConfig = BootstrapConfig()) -> float:
    """Bootstrap SE of an arbitrary statistic of resampled row indices."""
    values = [statistic(resample_indices(n, config.seed, r)) for r in range(config.n_replicates)]
    return float(np.std(values, ddof=1))


def bootstrap_all(dataset: ObservationalDataset, estimators=DEFAULT_ESTIMATORS,
                  config: BootstrapConfig = BootstrapConfig(),
                  est_config: EstimatorConfig = EstimatorConfig()):
    """Point estimates on ``dataset`` plus bootstrap SEs for each estimator.

    Each replicate resamples all rows jointly and refits every model. When a
    resample has no treated or no untreated units, or an estimator fails on
    it, that estimator redraws (attempt index bumps the RNG stream) up to
    ``max_redraws`` times before the replicate is skipped for it.

    Returns ``(estimates, errors)``: a dict name -> :class:`BootstrapEstimate`
    and a dict name -> message for estimators that could not be bootstrapped.
    """
    estimators = tuple(estimators)
    base = run_all(dataset, estimators, est_config)
    errors = dict(base.errors)
    points = base.by_name()
    live = [e for e in estimators if e.name in points]
    samples: dict[str, list[float]] = {e.name: [] for e in live}
    skipped = {e.name: 0 for e in live}
    n = dataset.n
    for r in range(config.n_replicates):
        pending = list(live)
        for attempt in range(config.max_redraws + 1):
            if not pending:
                break
            boot = dataset.take(resample_indices(n, config.seed, r, attempt))
            if boot.n_treated == 0 or boot.n_untreated == 0:
                continue
            got = run_all(boot, pending, est_config).by_name()
            for name, res in got.items():
                samples[name].append(res.point)
            pending = [e for e in pending if e.name not in got]
        for e in pending:
            skipped[e.name] += 1

    out = {}
    for e in live:
        vals = samples[e.name]
        if len(vals) < 2:
            errors[e.name] = f"BootstrapError: only {len(vals)} replicates completed"
            continue
        out[e.name] = BootstrapEstimate(
            e, points[e.name].point, float(np.std(vals, ddof=1)), len(vals), skipped[e.name]
        )
    return out, errors


def bootstrap_se(dataset: ObservationalDataset, estimator: EstimatorId,
                 config: BootstrapConfig = BootstrapConfig(),
                 est_config: EstimatorConfig = EstimatorConfig()) -> tuple[float, float]:
    est, errors = bootstrap_all(dataset, (estimator,), config, est_config)
    if estimator.name in errors:
        raise BootstrapError(errors[estimator.name])
    found = est[estimator.name]
    return found.point, found.se


@dataclass
class EstimatorCoverage:
    coverage_rate: float
    error_over_se: list[float]
    n_used: int
    n_failed: int
    records: list[dict] = field(default_factory=list, repr=False)


@dataclass
class CoverageReport:
    per_estimator: dict[str, EstimatorCoverage]
    n_iterations: int

    def to_dict(self) -> dict:
        return {
            "n_iterations": self.n_iterations,
            "estimators": {
                name: {
                    "coverage_rate": c.coverage_rate,
                    "n_used": c.n_used,
                    "n_failed": c.n_failed,
                    "error_over_se": [_json_float(v) for v in c.error_over_se],
                    "iterations": c.records,
                }
                for name, c in self.per_estimator.items()
            },
        }


def _json_float(v: float):
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else "-inf" if v < 0 else "nan"


def error_over_se(point: float, truth: float, se: float) -> float:
    err = point - truth
    if se > 0:
        return err / se
    if err == 0:
        return 0.0
    return math.copysign(math.inf, err)


def _coverage_iteration(i, source, estimators, config, est_config):
    dataset, truth = source(i)
    est, errors = bootstrap_all(dataset.masked(), estimators, config, est_config)
    return truth.true_treated_mean, est, errors


def coverage_experiment(source: Callable[[int], tuple[ObservationalDataset, GroundTruth]],
                        estimators=DEFAULT_ESTIMATORS, n_iterations: int = 100,
                        config: BootstrapConfig = BootstrapConfig(),
                        est_config: EstimatorConfig = EstimatorConfig(),
                        threads: int | None = 1) -> CoverageReport:
    """Repeat point + bootstrap CI on fresh datasets and score coverage.

    ``source(i)`` returns the i-th ``(dataset, ground_truth)``; it must be
    picklable when ``threads > 1``. Every iteration uses the same bootstrap
    seed, so a source repeating one dataset yields identical intervals.
    """
    estimators = tuple(estimators)
    job = functools.partial(_coverage_iteration, source=source, estimators=estimators,
                            config=config, est_config=est_config)
    outputs = parallel_map(job, range(n_iterations), threads)
    per = {}
    for e in estimators:
        ratios, records, covered, failed = [], [], 0, 0
        for i, (truth, est, errors) in enumerate(outputs):
            if e.name not in est:
                failed += 1
                records.append({"iteration": i, "truth": truth, "error": errors.get(e.name)})
                continue
            b = est[e.name]
            lo, hi = b.ci95
            hit = bool(lo <= truth <= hi) and not (b.se == 0 and b.point != truth)
            covered += hit
            ratios.append(error_over_se(b.point, truth, b.se))
            records.append({"iteration": i, "truth": truth, "point": b.point, "se": b.se,
                            "covered": hit, "skipped_replicates": b.n_skipped})
        used = len(ratios)
        per[e.name] = EstimatorCoverage(covered / used if used else float("nan"),
                                        ratios, used, failed, records)
    return CoverageReport(per, n_iterations)


DEFAULT_RATIO_EDGES = np.concatenate(([-np.inf], np.linspace(-5.0, 5.0, 21), [np.inf]))


def ratio_histogram(samples, edges=DEFAULT_RATIO_EDGES):
    """Counts of error/SE ratios per bin ``[lo, hi)``; the last bin includes +inf."""
    x = np.asarray(samples, dtype=np.float64)
    x = x[~np.isnan(x)]
    edges = np.asarray(edges, dtype=np.float64)
    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return edges, counts
