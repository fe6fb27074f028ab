"""Mock-policy studies on a labeled fraud table.

A Gaussian naive Bayes "policy" trained on a few features blocks the
highest-scoring rows; the estimators then try to recover the fraud rate of
the blocked rows from the unblocked ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .bootstrap import BootstrapConfig, CoverageReport, coverage_experiment
from .dataset import LabeledTable, ObservationalDataset, true_treated_mean
from .estimators import DEFAULT_ESTIMATORS, EstimatorConfig
from .models import ModelError, anova_select, fit_gnb
from .simgen import StudyReport, evaluate_study


class EmpiricalError(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalStudyConfig:
    n_iterations: int = 1000
    n_policy_features: int = 4
    n_selected_features: int = 10
    treated_size: int | tuple[int, int] = 100
    train_fraction: float = 0.5
    score_noise: str = "none"
    seed: int = 0
    # coverage protocol only: rows sampled per outer iteration
    n_nonfraud: int = 900
    n_fraud: int = 100

    def __post_init__(self):
        if not 1 <= self.n_policy_features <= self.n_selected_features:
            raise ValueError("need 1 <= n_policy_features <= n_selected_features")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.score_noise not in ("none", "uniform01"):
            raise ValueError("score_noise must be 'none' or 'uniform01'")
        lo, hi = self.treated_range
        if not 1 <= lo <= hi:
            raise ValueError("treated_size must be positive")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")

    @property
    def treated_range(self) -> tuple[int, int]:
        if isinstance(self.treated_size, (tuple, list)):
            lo, hi = self.treated_size
            return int(lo), int(hi)
        return int(self.treated_size), int(self.treated_size)


def table6_config(**overrides) -> EmpiricalStudyConfig:
    return EmpiricalStudyConfig(**{"n_iterations": 1000, "treated_size": 100,
                                   "train_fraction": 0.5, "score_noise": "none", **overrides})


def table7_config(**overrides) -> EmpiricalStudyConfig:
    return EmpiricalStudyConfig(**{"n_iterations": 100, "treated_size": (50, 80),
                                   "train_fraction": 0.1, "score_noise": "uniform01", **overrides})


def assign_top(scores, n_treated: int) -> np.ndarray:
    """0/1 vector marking the ``n_treated`` highest scores; ties go to lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 1 <= n_treated <= scores.size:
        raise EmpiricalError(f"cannot treat {n_treated} of {scores.size} rows")
    order = np.argsort(-scores, kind="stable")
    W = np.zeros(scores.size, dtype=np.uint8)
    W[order[:n_treated]] = 1
    return W


def _policy_scores(X_train, y_train, X_score):
    # standardize on the training rows; Time/Amount dwarf the PCA columns
    mu = X_train.mean(axis=0)
    sd = X_train.std(axis=0)
    sd[sd == 0] = 1.0
    model = fit_gnb((X_train - mu) / sd, y_train)
    jll = model.joint_log_likelihood((X_score - mu) / sd)
    return jll[:, 1] - jll[:, 0]


def _draw_treated_size(rng, config):
    lo, hi = config.treated_range
    return lo if lo == hi else int(rng.integers(lo, hi + 1))


@dataclass(frozen=True)
class PolicySource:
    """``i -> (test-set dataset, truth)`` for the split-sample protocol."""

    table: LabeledTable
    selected: tuple[int, ...]
    config: EmpiricalStudyConfig

    def __call__(self, i: int):
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, i])
        policy = rng.choice(np.asarray(self.selected), cfg.n_policy_features, replace=False)
        n = self.table.n
        perm = rng.permutation(n)
        n_train = int(round(cfg.train_fraction * n))
        train = np.sort(perm[:n_train])
        test = np.sort(perm[n_train:])
        n_treated = _draw_treated_size(rng, cfg)
        if test.size < n_treated:
            raise EmpiricalError(f"test split has {test.size} rows, fewer than {n_treated} to treat")
        X, y = self.table.features, self.table.labels
        logit = _policy_scores(X[np.ix_(train, policy)], y[train], X[np.ix_(test, policy)])
        score = _apply_noise(logit, cfg, rng)
        W = assign_top(score, n_treated)
        cols = list(self.selected)
        names = tuple(self.table.feature_names[j] for j in cols)
        ds = ObservationalDataset(X[np.ix_(test, cols)], W, y[test].astype(np.int8), names)
        return ds, true_treated_mean(ds)


def _apply_noise(logit, cfg, rng):
    if cfg.score_noise == "none":
        return logit
    return expit(logit) + rng.uniform(0.0, 1.0, size=logit.size)


@dataclass(frozen=True)
class CoverageSource:
    """``i -> (dataset, truth)`` for the fixed-composition coverage protocol."""

    table: LabeledTable
    selected: tuple[int, ...]
    config: EmpiricalStudyConfig
    max_train_redraws: int = 20

    def __call__(self, i: int):
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, i])
        y_all = self.table.labels
        neg = np.flatnonzero(y_all == 0)
        pos = np.flatnonzero(y_all == 1)
        rows = np.sort(np.concatenate([
            rng.choice(neg, cfg.n_nonfraud, replace=False),
            rng.choice(pos, cfg.n_fraud, replace=False),
        ]))
        X = self.table.features[rows]
        y = y_all[rows]
        policy = rng.choice(np.asarray(self.selected), cfg.n_policy_features, replace=False)
        n_train = max(4, int(round(cfg.train_fraction * rows.size)))
        for _ in range(self.max_train_redraws):
            train = np.sort(rng.choice(rows.size, n_train, replace=False))
            try:
                logit = _policy_scores(X[np.ix_(train, policy)], y[train], X[:, policy])
                break
            except ModelError:
                continue
        else:
            raise EmpiricalError("training subsample never contained both classes")
        score = _apply_noise(logit, cfg, rng)
        W = assign_top(score, _draw_treated_size(rng, cfg))
        cols = list(self.selected)
        names = tuple(self.table.feature_names[j] for j in cols)
        ds = ObservationalDataset(X[:, cols], W, y.astype(np.int8), names)
        return ds, true_treated_mean(ds)


def select_features(table: LabeledTable, config: EmpiricalStudyConfig) -> tuple[int, ...]:
    if config.n_selected_features > table.features.shape[1]:
        raise EmpiricalError("n_selected_features exceeds the number of columns")
    chosen = anova_select(table.features, table.labels, config.n_selected_features)
    return tuple(int(j) for j in chosen)


def _check_classes(table: LabeledTable):
    if not (np.any(table.labels == 0) and np.any(table.labels == 1)):
        raise EmpiricalError("both classes must be present")


def run_empirical_study(table: LabeledTable, config: EmpiricalStudyConfig = table6_config(),
                        estimators=DEFAULT_ESTIMATORS,
                        est_config: EstimatorConfig = EstimatorConfig(),
                        threads: int | None = 1) -> StudyReport:
    """Split-sample mock-policy study; estimators see the test half only.

    The ANOVA feature set is chosen once on the full table. Each iteration
    draws the policy features from it, splits rows, fits the policy on the
    train part and blocks the top-scoring test rows.
    """
    _check_classes(table)
    source = PolicySource(table, select_features(table, config), config)
    return evaluate_study(source, config.n_iterations, estimators, est_config, threads)


def run_empirical_coverage(table: LabeledTable, config: EmpiricalStudyConfig = table7_config(),
                           estimators=DEFAULT_ESTIMATORS,
                           boot_config: BootstrapConfig = BootstrapConfig(),
                           est_config: EstimatorConfig = EstimatorConfig(),
                           threads: int | None = 1) -> CoverageReport:
    _check_classes(table)
    if (table.labels == 0).sum() < config.n_nonfraud or (table.labels == 1).sum() < config.n_fraud:
        raise EmpiricalError(
            f"need at least {config.n_nonfraud} non-fraud and {config.n_fraud} fraud rows"
        )
    source = CoverageSource(table, select_features(table, config), config)
    return coverage_experiment(source, estimators, config.n_iterations, boot_config,
                               est_config, threads)


def synthetic_fraud_table(n: int = 20_000, d: int = 10, fraud_rate: float = 0.02,
                          seed: int = 0) -> LabeledTable:
    """Two-Gaussian stand-in for the credit-card table.

    Fraud rows are shifted by a per-feature amount drawn from N(0, 1), so the
    features differ in how informative they are.
    """
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < fraud_rate).astype(np.uint8)
    shift = rng.normal(0.0, 1.0, size=d)
    X = rng.standard_normal((n, d)) + labels[:, None] * shift
    return LabeledTable(X, labels, tuple(f"V{j + 1}" for j in range(d)))
