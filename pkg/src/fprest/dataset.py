"""Observational data: representation, CSV ingestion and null-rate checks.

Outcomes are stored as ``int8`` with :data:`MISSING` marking unobserved
cells; treatment is ``uint8``; covariates are ``float64``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

MISSING = -1

CREDITCARD_FEATURES = ["Time"] + [f"V{i}" for i in range(1, 29)] + ["Amount"]
CREDITCARD_LABEL = "Class"

TREATMENT_COLUMN = "__treatment"
OUTCOME_COLUMN = "__outcome"


class DatasetError(ValueError):
    """Base class for data problems."""


class SchemaError(DatasetError):
    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class ParseError(DatasetError):
    def __init__(self, column: str, row: int, value: str):
        self.column = column
        self.row = row
        self.value = value
        super().__init__(f"cannot parse {value!r} in column {column!r} at row {row}")


class NullRateError(DatasetError):
    def __init__(self, report: "NullRateReport"):
        self.report = report
        cols = ", ".join(f"{c}={report.rates[c]:.3f}" for c in report.failing)
        super().__init__(f"null rate above {report.threshold} in: {cols}")


@dataclass(frozen=True)
class ObservationalDataset:
    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.covariates, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DatasetError("covariates must be a 2-D matrix")
        n, d = X.shape
        W = np.asarray(self.treatment)
        if W.shape != (n,):
            raise DatasetError(f"treatment must have length {n}")
        if not np.isin(W, (0, 1)).all():
            raise DatasetError("treatment must contain only 0 and 1")
        Y = np.asarray(self.outcome)
        if Y.shape != (n,):
            raise DatasetError(f"outcome must have length {n}")
        if Y.dtype.kind == "f":
            Y = np.where(np.isnan(Y), MISSING, Y)
        if not np.isin(Y, (0, 1, MISSING)).all():
            raise DatasetError("outcome must contain only 0, 1 or missing")
        W = W.astype(np.uint8)
        Y = Y.astype(np.int8)
        if (Y[W == 0] == MISSING).any():
            raise DatasetError("outcome must be observed for every untreated unit")
        if not np.isfinite(X).all():
            raise DatasetError("covariates contain NaN or Inf")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise DatasetError(f"expected {d} feature names, got {len(names)}")
        for arr in (X, W, Y):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", W)
        object.__setattr__(self, "outcome", Y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def treated(self) -> np.ndarray:
        return self.treatment == 1

    @property
    def untreated(self) -> np.ndarray:
        return self.treatment == 0

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_untreated(self) -> int:
        return self.n - self.n_treated

    def masked(self) -> "ObservationalDataset":
        """Return the estimator-facing view: outcomes hidden wherever treated."""
        Y = np.where(self.treated, MISSING, self.outcome)
        return ObservationalDataset(self.covariates, self.treatment, Y, self.feature_names)

    def take(self, rows) -> "ObservationalDataset":
        rows = np.asarray(rows)
        return ObservationalDataset(
            self.covariates[rows], self.treatment[rows], self.outcome[rows], self.feature_names
        )

    def select_features(self, columns: Sequence[int]) -> "ObservationalDataset":
        columns = list(columns)
        return ObservationalDataset(
            self.covariates[:, columns],
            self.treatment,
            self.outcome,
            tuple(self.feature_names[j] for j in columns),
        )

    def require_both_groups(self):
        if self.n_treated == 0 or self.n_untreated == 0:
            raise DatasetError(
                f"need treated and untreated units (treated={self.n_treated}, "
                f"untreated={self.n_untreated})"
            )


@dataclass(frozen=True)
class GroundTruth:
    true_treated_mean: float


@dataclass(frozen=True)
class LabeledTable:
    """Features plus binary labels, before any treatment is assigned."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class NullRateReport:
    rates: dict[str, float]
    threshold: float
    failing: list[str] = field(default_factory=list)
    dropped_rows: int = 0

    @property
    def passed(self) -> bool:
        return not self.failing


def true_treated_mean(dataset: ObservationalDataset) -> GroundTruth:
    if dataset.n_treated == 0:
        raise DatasetError("no treated units")
    y = dataset.outcome[dataset.treated]
    if (y == MISSING).any():
        raise DatasetError("treated outcomes are not fully known")
    return GroundTruth(float(y.mean()))


def validate_null_rates(table: pd.DataFrame, threshold: float = 0.10):
    """Check per-column null fractions and drop incomplete rows.

    A column fails when its null fraction is strictly above ``threshold``.
    Rows with a missing cell in any passing column are dropped from the
    returned frame; failing columns are left as-is for the caller to act on.

    Returns
    -------
    report : NullRateReport
    cleaned : pandas.DataFrame
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    n = len(table)
    nulls = table.isna()
    rates = {str(c): (float(nulls[c].sum()) / n if n else 0.0) for c in table.columns}
    failing = [c for c, r in rates.items() if r > threshold]
    passing = [c for c in table.columns if str(c) not in failing]
    keep = ~nulls[passing].any(axis=1) if passing else pd.Series(True, index=table.index)
    report = NullRateReport(rates, threshold, failing, int((~keep).sum()))
    return report, table.loc[keep]


def _read_numeric_frame(path, required: Sequence[str]) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    raw.columns = [c.strip() for c in raw.columns]
    for col in required:
        if col not in raw.columns:
            raise SchemaError(col)
    out = {}
    for col in raw.columns:
        text = raw[col].str.strip().to_numpy(dtype=object)
        empty = text == ""
        values = np.full(len(text), np.nan)
        try:
            values[~empty] = np.asarray(text[~empty], dtype=np.float64)
        except ValueError:
            for row in np.flatnonzero(~empty):
                try:
                    float(text[row])
                except ValueError:
                    raise ParseError(col, int(row), raw[col].iloc[row]) from None
        bad = ~empty & ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ParseError(col, row, raw[col].iloc[row])
        out[col] = values
    return pd.DataFrame(out, index=raw.index)


def load_creditcard_csv(path, null_threshold: float = 0.10) -> LabeledTable:
    """Load the credit-card fraud CSV (Time, V1..V28, Amount, Class).

    Columns are matched by name. Raises :class:`SchemaError` for a missing
    column, :class:`ParseError` for a non-numeric cell and
    :class:`NullRateError` when a column's null rate exceeds the threshold.
    """
    frame = _read_numeric_frame(path, CREDITCARD_FEATURES + [CREDITCARD_LABEL])
    frame = frame[CREDITCARD_FEATURES + [CREDITCARD_LABEL]]
    report, frame = validate_null_rates(frame, null_threshold)
    if not report.passed:
        raise NullRateError(report)
    labels = frame[CREDITCARD_LABEL].to_numpy()
    if not np.isin(labels, (0, 1)).all():
        raise DatasetError("Class must be 0 or 1")
    return LabeledTable(
        frame[CREDITCARD_FEATURES].to_numpy(dtype=np.float64),
        labels.astype(np.uint8),
        tuple(CREDITCARD_FEATURES),
    )


def load_dataset_csv(path, null_threshold: float = 0.10):
    """Load a generic dataset CSV with ``__treatment``/``__outcome`` columns.

    Returns ``(dataset, n_treated_observed)``, where the second value counts
    treated rows that carried an outcome. Those outcomes are kept in the
    dataset; estimators never read them.
    """
    frame = _read_numeric_frame(path, [TREATMENT_COLUMN, OUTCOME_COLUMN])
    features = [c for c in frame.columns if c not in (TREATMENT_COLUMN, OUTCOME_COLUMN)]
    if not features:
        raise SchemaError("<feature>", "dataset has no feature columns")
    report, clean = validate_null_rates(frame[features + [TREATMENT_COLUMN]], null_threshold)
    if not report.passed:
        raise NullRateError(report)
    frame = frame.loc[clean.index]
    W = frame[TREATMENT_COLUMN].to_numpy()
    Y = frame[OUTCOME_COLUMN].to_numpy(dtype=float)
    observed_treated = int(((W == 1) & ~np.isnan(Y)).sum())
    ds = ObservationalDataset(frame[features].to_numpy(dtype=np.float64), W, Y, tuple(features))
    return ds, observed_treated


def write_dataset_csv(dataset: ObservationalDataset, path):
    """Write ``dataset`` with full float precision; missing outcomes are empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + [TREATMENT_COLUMN, OUTCOME_COLUMN])
        for x, w, y in zip(dataset.covariates, dataset.treatment, dataset.outcome):
            writer.writerow([repr(float(v)) for v in x] + [int(w), "" if y == MISSING else int(y)])
