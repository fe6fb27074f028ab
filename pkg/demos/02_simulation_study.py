"""
Accuracy over many simulated populations
========================================

Repeats the one-dataset experiment on fresh populations and reports bias,
RMSE and MAE (all x100) per estimator, for the linear outcome design and the
one where the outcome depends on x1 squared (so the logistic outcome
model is misspecified).

The full-size version is `fprest simulate --iterations 1000`; here 100
iterations keep the run at a minute or two.

Run:  python demos/02_simulation_study.py [iterations]
"""

import sys

from fprest import run_table_study

n_iter = int(sys.argv[1]) if len(sys.argv) > 1 else 100

for design in (1, 2):
    report = run_table_study(design, n_samples=10_000, n_iterations=n_iter, seed=0, threads=None)
    print(f"\noutcome design {design}  ({n_iter} populations of 10K)")
    print(f"{'estimator':<10} {'bias':>8} {'rmse':>8} {'mae':>8}")
    for row in sorted(report.rows, key=lambda r: r.rmse):
        print(f"{row.estimator:<10} {row.bias:8.2f} {row.rmse:8.2f} {row.mae:8.2f}")

# scatter data (truth vs estimate per iteration) sits in report.scatter; the
# CLI writes it to scatter.csv for plotting elsewhere
