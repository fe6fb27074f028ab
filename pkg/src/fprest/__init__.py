"""Estimate the outcome rate of a treated group whose outcomes are never observed.

Six estimators (propensity and outcome-score matching, inverse-probability
weighting over non-respondents, mean predicted outcome and its weighted
variant) with bootstrap intervals, plus the synthetic and mock-policy study
drivers used to compare them.
"""

from .bootstrap import (
    BootstrapConfig,
    BootstrapEstimate,
    CoverageReport,
    bootstrap_all,
    bootstrap_se,
    coverage_experiment,
)
from .dataset import (
    GroundTruth,
    LabeledTable,
    ObservationalDataset,
    load_creditcard_csv,
    load_dataset_csv,
    true_treated_mean,
    write_dataset_csv,
)
from .estimators import (
    DEFAULT_ESTIMATORS,
    IPW_NR,
    MPO,
    OSM_1NN,
    OSM_10NN,
    PSM_1NN,
    WMPO,
    EstimateResult,
    EstimatorConfig,
    EstimatorId,
    ci95,
    run_all,
)
from .models import FitConfig, fit_gnb, fit_logit, fit_outcome, fit_propensity
from .simgen import DesignSource, SimDesignConfig, generate_design, run_table_study

__version__ = "0.1.0"
