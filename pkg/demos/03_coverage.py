"""
Do the bootstrap intervals cover?
=================================

For each simulated population: estimate, bootstrap the SE (models refit in
every replicate), form point +/- 1.96 SE and check whether the hidden truth
falls inside. Also prints a text histogram of error / SE, which should look
roughly standard normal when the interval is honest.

A 20 x 30 run takes a few minutes on one core. `fprest coverage` runs the
100 x 100 version.

Run:  python demos/03_coverage.py [iterations] [replicates]
"""

import sys

import numpy as np

from fprest import BootstrapConfig, DesignSource, coverage_experiment
from fprest.bootstrap import ratio_histogram
from fprest.estimators import IPW_NR, MPO, OSM_10NN

n_iter = int(sys.argv[1]) if len(sys.argv) > 1 else 20
n_boot = int(sys.argv[2]) if len(sys.argv) > 2 else 30

source = DesignSource(outcome_design=1, n_samples=10_000, seed=0)
report = coverage_experiment(source, (OSM_10NN, IPW_NR, MPO), n_iter,
                             BootstrapConfig(n_boot, seed=0), threads=None)

for name, cov in report.per_estimator.items():
    print(f"\n{name}: coverage {cov.coverage_rate:.2f} over {cov.n_used} populations")
    edges, counts = ratio_histogram(cov.error_over_se, np.arange(-4, 4.5, 1.0))
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        print(f"  [{lo:+.0f}, {hi:+.0f})  {'#' * int(c)}")

# IPW tends to sit far outside its own interval: its SE is fine, its bias is not
