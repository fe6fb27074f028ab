"""
Mock blocking policies on a fraud table
=======================================

A Gaussian naive Bayes "policy" trained on four features blocks the 100
highest-scoring rows of a held-out half. The estimators, which get to see
ten features, try to recover the fraud rate of those 100 rows from the rows
the policy let through.

Pass the path of the credit-card fraud CSV (Time, V1..V28, Amount, Class)
to run on real data; without it a two-Gaussian stand-in is generated.

Run:  python demos/04_mock_policy.py [creditcard.csv] [iterations]
"""

import sys

from fprest.dataset import load_creditcard_csv
from fprest.empirical import run_empirical_study, synthetic_fraud_table, table6_config

if len(sys.argv) > 1 and sys.argv[1].endswith(".csv"):
    table = load_creditcard_csv(sys.argv[1])
    source = sys.argv[1]
else:
    table = synthetic_fraud_table(n=50_000, d=10, fraud_rate=0.02, seed=0)
    source = "synthetic stand-in"
n_iter = int(sys.argv[-1]) if sys.argv[-1].isdigit() else 50

print(f"{source}: {table.n} rows, {int(table.labels.sum())} fraud")
report = run_empirical_study(table, table6_config(n_iterations=n_iter, seed=0), threads=None)
print(f"\n{'estimator':<10} {'bias':>8} {'rmse':>8} {'mae':>8}  failed")
for row in report.rows:
    print(f"{row.estimator:<10} {row.bias:8.2f} {row.rmse:8.2f} {row.mae:8.2f}  {row.n_failed}")
