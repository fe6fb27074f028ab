"""Scoring models: L2 logistic regression (IRLS), Gaussian naive Bayes and
one-way ANOVA feature ranking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .dataset import ObservationalDataset

WEIGHT_FORMULAS = ("odds", "paper")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    l2_lambda: float = 1.0
    max_iter: int = 100
    tol: float = 1e-8
    prob_clamp_eps: float = 1e-6
    weight_formula: str = "odds"

    def __post_init__(self):
        if self.weight_formula not in WEIGHT_FORMULAS:
            raise ValueError(f"weight_formula must be one of {WEIGHT_FORMULAS}")
        if self.l2_lambda < 0 or self.max_iter < 1 or self.tol <= 0:
            raise ValueError("invalid logistic fit settings")
        if not 0 < self.prob_clamp_eps < 0.5:
            raise ValueError("prob_clamp_eps must be in (0, 0.5)")


@dataclass(frozen=True)
class FittedLogit:
    """Logistic model fitted on internally standardized features.

    ``weights``/``intercept`` are on the original feature scale;
    ``coef_std``/``intercept_std`` are what the optimizer actually solved for.
    """

    coef_std: np.ndarray
    intercept_std: float
    mean: np.ndarray
    scale: np.ndarray
    converged: bool
    iterations_used: int
    eps: float = 1e-6
    loss_path: tuple[float, ...] = field(default=(), repr=False)
    grad_norm: float = float("nan")

    @property
    def weights(self) -> np.ndarray:
        return self.coef_std / self.scale

    @property
    def intercept(self) -> float:
        return float(self.intercept_std - np.dot(self.coef_std, self.mean / self.scale))

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.coef_std + self.intercept_std

    def predict(self, X) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), self.eps, 1.0 - self.eps)


def _weighted_standardization(X, w):
    total = w.sum()
    mean = (w @ X) / total
    var = (w @ (X - mean) ** 2) / total
    scale = np.sqrt(var)
    # constant columns keep scale 1 so they stay finite; their coefficient is
    # then driven to zero by the penalty
    scale[~(scale > 1e-12 * np.maximum(1.0, np.abs(mean)))] = 1.0
    return mean, scale


def fit_logit(X, y, sample_weight=None, config: FitConfig = FitConfig()) -> FittedLogit:
    """Penalized logistic regression by Newton/IRLS with backtracking.

    Minimizes ``sum_i v_i * nll_i + lambda/2 * ||beta||^2`` over standardized
    features with the intercept unpenalized, where ``v`` is the weight vector
    rescaled to sum to the number of positively weighted rows. Uniform weights
    thus reproduce the unweighted fit, and zero weights act like dropped rows.
    The optimizer works on that objective divided by the row count, so ``tol``
    applies to the mean-scale gradient.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if y.shape != (n,):
        raise ModelError("labels must match rows")
    if sample_weight is None:
        w = np.ones(n)
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if w.shape != (n,):
            raise ModelError("sample_weight must match rows")
        if not np.isfinite(w).all():
            raise ModelError("sample weights must be finite")
        if (w < 0).any() or not w.sum() > 0:
            raise ModelError("sample weights must be non-negative with positive sum")
    active = w > 0
    labels = y[active]
    if labels.size == 0 or labels.min() == labels.max():
        raise ModelError("logistic fit needs both labels among weighted rows")

    mean, scale = _weighted_standardization(X, w)
    Z = np.empty((n, d + 1))
    Z[:, :d] = (X - mean) / scale
    Z[:, d] = 1.0
    wn = w / w.sum()
    lam = np.full(d + 1, config.l2_lambda / active.sum())
    lam[d] = 0.0

    def objective(beta):
        eta = Z @ beta
        nll = -(y * log_expit(eta) + (1.0 - y) * log_expit(-eta))
        return float(wn @ nll + 0.5 * np.dot(lam * beta, beta)), eta

    beta = np.zeros(d + 1)
    ybar = float(wn @ y)
    beta[d] = np.log(ybar / (1.0 - ybar))
    loss, eta = objective(beta)
    path = [loss]
    steps = 0
    for _ in range(config.max_iter):
        p = expit(eta)
        grad = Z.T @ (wn * (p - y)) + lam * beta
        if np.linalg.norm(grad) <= config.tol:
            break
        s = wn * p * (1.0 - p)
        H = (Z * s[:, None]).T @ Z
        H[np.diag_indices_from(H)] += lam
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = beta - t * step
            cand_loss, cand_eta = objective(cand)
            if cand_loss < loss or (cand_loss == loss and t == 1.0):
                break
            t *= 0.5
        else:
            break
        beta, loss, eta = cand, cand_loss, cand_eta
        path.append(loss)
        steps += 1
    gnorm = float(np.linalg.norm(Z.T @ (wn * (expit(eta) - y)) + lam * beta))

    return FittedLogit(
        coef_std=beta[:d].copy(),
        intercept_std=float(beta[d]),
        mean=mean,
        scale=scale,
        converged=gnorm <= config.tol,
        iterations_used=steps,
        eps=config.prob_clamp_eps,
        loss_path=tuple(path),
        grad_norm=gnorm,
    )


def fit_propensity(dataset: ObservationalDataset, config: FitConfig = FitConfig()) -> FittedLogit:
    """Regress treatment on covariates over all units."""
    dataset.require_both_groups()
    return fit_logit(dataset.covariates, dataset.treatment, config=config)


def fit_outcome(dataset: ObservationalDataset, unit_weights=None,
                config: FitConfig = FitConfig()) -> FittedLogit:
    """Fit the outcome model on untreated units only.

    ``unit_weights`` (optional) aligns with the untreated rows in dataset
    order.
    """
    mask = dataset.untreated
    X = dataset.covariates[mask]
    y = dataset.outcome[mask]
    if y.size == 0:
        raise ModelError("no untreated units to fit the outcome model on")
    if unit_weights is not None:
        unit_weights = np.asarray(unit_weights, dtype=np.float64)
        if unit_weights.shape != y.shape:
            raise ModelError(f"expected {y.size} weights for the untreated units")
    if y.min() == y.max():
        raise ModelError(f"untreated outcomes are all {int(y[0])}")
    return fit_logit(X, y, sample_weight=unit_weights, config=config)


def nonrespondent_weights(propensities, formula: str = "odds") -> np.ndarray:
    """Reweighting factors for respondents (untreated units).

    ``odds`` gives pi / (1 - pi); ``paper`` gives the literal (1 - pi) / pi.
    """
    pi = np.asarray(propensities, dtype=np.float64)
    if not ((pi > 0) & (pi < 1)).all():
        raise ModelError("propensities must lie strictly inside (0, 1)")
    if formula == "odds":
        return pi / (1.0 - pi)
    if formula == "paper":
        return (1.0 - pi) / pi
    raise ValueError(f"unknown weight formula {formula!r}")


@dataclass(frozen=True)
class FittedGNB:
    class_priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    variance_floor: float

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        out = np.empty((X.shape[0], 2))
        for c in (0, 1):
            var = self.variances[c]
            out[:, c] = (
                np.log(self.class_priors[c])
                - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            )
        return out

    def score(self, X) -> np.ndarray:
        """P(class = 1 | x)."""
        jll = self.joint_log_likelihood(X)
        return expit(jll[:, 1] - jll[:, 0])


def fit_gnb(features, labels) -> FittedGNB:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    if y.shape != (X.shape[0],) or not np.isin(y, (0, 1)).all():
        raise ModelError("labels must be a 0/1 vector matching the rows")
    counts = np.array([(y == 0).sum(), (y == 1).sum()])
    if counts.min() < 2:
        raise ModelError("Gaussian NB needs at least two rows of each class")
    max_var = float(X.var(axis=0).max()) if X.size else 0.0
    floor = 1e-9 * max_var if max_var > 0 else 1e-9
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([X[y == c].var(axis=0) for c in (0, 1)])
    variances = np.maximum(variances, floor)
    return FittedGNB(counts / counts.sum(), means, variances, floor)


def anova_f(features, labels) -> np.ndarray:
    """Per-feature one-way ANOVA F statistic for a binary grouping.

    Zero within-group spread gives +inf; a constant feature gives 0.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    groups = [X[y == c] for c in (0, 1)]
    if min(g.shape[0] for g in groups) == 0:
        raise ModelError("both classes must be present")
    n = X.shape[0]
    grand = X.mean(axis=0)
    ss_between = sum(g.shape[0] * (g.mean(axis=0) - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean(axis=0)) ** 2).sum(axis=0) for g in groups)
    df_within = n - 2
    total = ss_between + ss_within
    with np.errstate(divide="ignore", invalid="ignore"):
        F = ss_between / (ss_within / df_within)
    # within-group spread at rounding-noise level counts as zero
    flat = ss_within <= 1e-26 * total
    F[flat] = np.inf
    F[total == 0] = 0.0
    return F


def anova_select(features, labels, k: int) -> np.ndarray:
    """Indices of the ``k`` largest F statistics, descending; ties to lower index."""
    F = anova_f(features, labels)
    d = F.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    order = np.lexsort((np.arange(d), -F))
    return order[:k]
