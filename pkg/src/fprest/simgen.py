"""Synthetic threshold designs and the repeated-sampling accuracy study."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .dataset import GroundTruth, ObservationalDataset, true_treated_mean
from .estimators import DEFAULT_ESTIMATORS, EstimatorConfig, run_all


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class SimDesignConfig:
    outcome_design: int = 1
    n_samples: int = 10_000
    sigma: float = 1.0
    seed: int = 0
    coef_low: float = 0.0

    def __post_init__(self):
        if self.outcome_design not in (1, 2):
            raise ValueError("outcome_design must be 1 or 2")
        if self.n_samples < 100:
            raise ValueError("n_samples must be at least 100")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.coef_low < 1.0:
            raise ValueError("coef_low must be below 1")


@dataclass(frozen=True)
class DesignParams:
    a: np.ndarray
    b: np.ndarray
    w: float
    y: float


def generate_design(config: SimDesignConfig, rng: np.random.Generator | None = None,
                    return_params: bool = False, params: DesignParams | None = None):
    """Draw one dataset from the threshold design.

    Covariates are three standard normals. Treatment is ``a.x > w`` and the
    outcome is ``b.x + eps > y`` (design 1) or the same with ``x1`` squared
    (design 2), where ``a, b ~ U(coef_low, 1)^3`` (``coef_low`` defaults to
    0), ``w, y ~ U(-1,1)`` and ``eps ~ N(0, sigma)`` are all fresh per dataset
    unless ``params`` pins them. All outcomes are kept; call ``masked()`` on
    the result for the estimator-facing view.

    A draw with an empty treated or untreated group is rejected and
    ``(a, w)`` redrawn, at most 100 times.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    # design parameters and unit draws use separate streams, so one seed gives
    # the same (a, b, w, y) at every sample size
    prng, drng = rng.spawn(2)
    n = config.n_samples
    X = drng.standard_normal((n, 3))
    eps = drng.normal(0.0, config.sigma, size=n)
    lo = config.coef_low
    b = prng.uniform(lo, 1.0, size=3)
    y = float(prng.uniform(-1.0, 1.0))
    for _ in range(101):
        a = prng.uniform(lo, 1.0, size=3)
        w = float(prng.uniform(-1.0, 1.0))
        if params is not None:
            a, b, w, y = params.a, params.b, params.w, params.y
        W = X @ a > w
        if 0 < W.sum() < n:
            break
        if params is not None:
            raise DesignError("fixed design parameters leave a group empty")
    else:
        raise DesignError("could not draw a design with both groups in 100 redraws")
    F = X.copy()
    if config.outcome_design == 2:
        F[:, 0] = F[:, 0] ** 2
    Y = F @ b + eps > y
    ds = ObservationalDataset(X, W.astype(np.uint8), Y.astype(np.int8), ("X1", "X2", "X3"))
    truth = true_treated_mean(ds)
    if return_params:
        return ds, truth, DesignParams(a, b, w, y)
    return ds, truth


@dataclass(frozen=True)
class DesignSource:
    """Picklable ``i -> (dataset, truth)`` over independent design draws."""

    outcome_design: int
    n_samples: int
    sigma: float = 1.0
    seed: int = 0
    coef_low: float = 0.0

    def __call__(self, i: int):
        cfg = SimDesignConfig(self.outcome_design, self.n_samples, self.sigma, self.seed,
                              self.coef_low)
        return generate_design(cfg, np.random.default_rng([self.seed, i]))


@dataclass(frozen=True)
class MetricsRow:
    estimator: str
    bias: float
    rmse: float
    mae: float
    n_used: int = 0
    n_failed: int = 0


def compute_metrics(errors) -> tuple[float, float, float]:
    """(bias, rmse, mae) of estimate - truth errors, times 100."""
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("no errors to summarize")
    if not np.isfinite(e).all():
        raise ValueError("errors must be finite")
    return (100.0 * float(e.mean()),
            100.0 * math.sqrt(float(np.mean(e * e))),
            100.0 * float(np.mean(np.abs(e))))


@dataclass
class StudyReport:
    rows: list[MetricsRow]
    scatter: list[tuple[str, int, float, float]]
    n_iterations: int
    failures: dict[str, list[tuple[int, str]]] = field(default_factory=dict)

    def row(self, name: str) -> MetricsRow:
        for r in self.rows:
            if r.estimator == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "n_iterations": self.n_iterations,
            "metrics": [r.__dict__ for r in self.rows],
            "failures": {k: [list(x) for x in v] for k, v in self.failures.items()},
        }


def _study_iteration(i, source, estimators, est_config):
    dataset, truth = source(i)
    batch = run_all(dataset.masked(), estimators, est_config)
    return truth.true_treated_mean, batch


def evaluate_study(source, n_iterations: int, estimators=DEFAULT_ESTIMATORS,
                   est_config: EstimatorConfig = EstimatorConfig(),
                   threads: int | None = 1) -> StudyReport:
    """Run every estimator on ``n_iterations`` datasets from ``source`` and
    aggregate the errors against the known treated mean."""
    estimators = tuple(estimators)
    job = functools.partial(_study_iteration, source=source, estimators=estimators,
                            est_config=est_config)
    outputs = parallel_map(job, range(n_iterations), threads)
    rows, scatter, failures = [], [], {}
    for e in estimators:
        errs = []
        for i, (truth, batch) in enumerate(outputs):
            got = batch.by_name().get(e.name)
            if got is None:
                failures.setdefault(e.name, []).append((i, batch.errors.get(e.name, "")))
                continue
            errs.append(got.point - truth)
            scatter.append((e.name, i, truth, got.point))
        n_failed = len(failures.get(e.name, []))
        if errs:
            bias, rmse, mae = compute_metrics(errs)
        else:
            bias = rmse = mae = float("nan")
        rows.append(MetricsRow(e.name, bias, rmse, mae, len(errs), n_failed))
    return StudyReport(rows, scatter, n_iterations, failures)


def run_table_study(design: int, n_samples: int, n_iterations: int, sigma: float = 1.0,
                    seed: int = 0, estimators=DEFAULT_ESTIMATORS,
                    est_config: EstimatorConfig = EstimatorConfig(),
                    threads: int | None = 1, coef_low: float = 0.0) -> StudyReport:
    SimDesignConfig(design, n_samples, sigma, seed, coef_low)
    source = DesignSource(design, n_samples, sigma, seed, coef_low)
    return evaluate_study(source, n_iterations, estimators, est_config, threads)
