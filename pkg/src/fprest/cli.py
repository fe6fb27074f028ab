"""``fprest`` command line: simulate, coverage, empirical, estimate.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Settings come from flags, then an optional ``--config`` JSON file (same keys
as the flag names with underscores), then built-in defaults. The seed falls
back to the ``FPR_SEED`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import reports
from ._parallel import default_threads
from .bootstrap import BootstrapConfig, bootstrap_all, coverage_experiment
from .dataset import DatasetError, load_creditcard_csv, load_dataset_csv
from .empirical import (
    EmpiricalStudyConfig,
    run_empirical_coverage,
    run_empirical_study,
    synthetic_fraud_table,
)
from .estimators import DEFAULT_ESTIMATORS, EstimatorConfig, EstimatorId
from .models import WEIGHT_FORMULAS, FitConfig
from .simgen import DesignSource, SimDesignConfig, run_table_study

log = logging.getLogger("fprest")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, out_required=True):
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--weight-formula", choices=WEIGHT_FORMULAS)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--multiset", dest="multiset", action="store_true", default=None,
                      help="average matched outcomes per treated unit (default)")
    mode.add_argument("--set-average", dest="multiset", action="store_false",
                      help="average over the deduplicated match set")
    p.add_argument("--l2-lambda", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--prob-clamp-eps", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fprest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthetic accuracy study (BIAS/RMSE/MAE)")
    _common(p)
    p.add_argument("--design", type=int, choices=(1, 2))
    p.add_argument("--n-samples", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--coef-low", type=float, help="lower bound of the U(low, 1) coefficients")

    p = sub.add_parser("coverage", help="bootstrap CI coverage on synthetic designs")
    _common(p)
    p.add_argument("--design", type=int, choices=(1, 2))
    p.add_argument("--n-samples", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--bootstrap-replicates", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--coef-low", type=float)

    p = sub.add_parser("empirical", help="mock-policy study on the credit-card table")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="path to creditcard.csv")
    src.add_argument("--synthetic", type=int, metavar="ROWS",
                     help="use a generated two-Gaussian stand-in with ROWS rows")
    p.add_argument("--mode", choices=("table6", "table7"))
    p.add_argument("--iterations", type=int)
    p.add_argument("--treated-size", help="N or LO:HI")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--score-noise", choices=("none", "uniform01"))
    p.add_argument("--policy-features", type=int)
    p.add_argument("--selected-features", type=int)
    p.add_argument("--bootstrap-replicates", type=int)

    p = sub.add_parser("estimate", help="estimate the treated mean of one dataset")
    _common(p, out_required=False)
    p.add_argument("--data", help="CSV with feature columns plus __treatment/__outcome")
    p.add_argument("--estimators", help="comma list, e.g. PSM_1NN,OSM_10NN,MPO")
    p.add_argument("--bootstrap-replicates", type=int)
    return parser


DEFAULTS = {
    "simulate": {"design": 1, "n_samples": 10_000, "iterations": 1000, "sigma": 1.0,
                 "coef_low": 0.0},
    "coverage": {"design": 1, "n_samples": 10_000, "iterations": 100,
                 "bootstrap_replicates": 100, "sigma": 1.0, "coef_low": 0.0},
    "empirical": {"mode": "table6", "iterations": None, "treated_size": None,
                  "train_fraction": None, "score_noise": None, "policy_features": 4,
                  "selected_features": 10, "bootstrap_replicates": 100, "data": None,
                  "synthetic": None},
    "estimate": {"estimators": ",".join(e.name for e in DEFAULT_ESTIMATORS),
                 "bootstrap_replicates": 100, "data": None},
}
COMMON_DEFAULTS = {"weight_formula": "odds", "multiset": True, "l2_lambda": 1.0,
                   "max_iter": 100, "tol": 1e-8, "prob_clamp_eps": 1e-6}
# execution-only settings: they never change results, so they stay out of the
# manifest's config echo
RUNTIME_KEYS = ("config", "out", "threads", "command")


def _resolve(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if v is not None}
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if "config" in file_cfg and isinstance(file_cfg["config"], dict):
            file_cfg = file_cfg["config"]  # a manifest from an earlier run
    known = set(DEFAULTS[args.command]) | set(COMMON_DEFAULTS) | {"seed"}
    unknown = set(file_cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = {**COMMON_DEFAULTS, **DEFAULTS[args.command], **file_cfg, **flags}
    if "seed" not in cfg:
        env = os.environ.get("FPR_SEED")
        try:
            cfg["seed"] = int(env) if env is not None else 0
        except ValueError as exc:
            raise UsageError(f"FPR_SEED must be an integer, got {env!r}") from exc
    return cfg


def _estimator_config(cfg) -> EstimatorConfig:
    fit = FitConfig(cfg["l2_lambda"], cfg["max_iter"], cfg["tol"], cfg["prob_clamp_eps"],
                    cfg["weight_formula"])
    return EstimatorConfig(fit, multiset=cfg["multiset"])


def _echo(cfg) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in RUNTIME_KEYS}


def _run(args) -> int:
    cfg = _resolve(args)
    threads = cfg.get("threads") or default_threads()
    try:
        est_cfg = _estimator_config(cfg)
        seed = cfg["seed"]
        if seed < 0:
            raise ValueError("seed must be non-negative")
        if args.command in ("simulate", "coverage"):
            SimDesignConfig(cfg["design"], cfg["n_samples"], cfg["sigma"], seed, cfg["coef_low"])
            if cfg["iterations"] < 1:
                raise ValueError("iterations must be positive")
        if args.command in ("coverage", "empirical", "estimate"):
            boot = BootstrapConfig(cfg["bootstrap_replicates"], seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    match_mode = "multiset" if est_cfg.multiset else "set"
    out = cfg.get("out")

    if args.command == "simulate":
        report = run_table_study(cfg["design"], cfg["n_samples"], cfg["iterations"],
                                 cfg["sigma"], seed, DEFAULT_ESTIMATORS, est_cfg, threads,
                                 cfg["coef_low"])
        reports.write_study(report, out)
    elif args.command == "coverage":
        source = DesignSource(cfg["design"], cfg["n_samples"], cfg["sigma"], seed, cfg["coef_low"])
        report = coverage_experiment(source, DEFAULT_ESTIMATORS, cfg["iterations"], boot,
                                     est_cfg, threads)
        reports.write_coverage(report, out)
    elif args.command == "empirical":
        _run_empirical(cfg, est_cfg, boot, threads, out)
    else:
        _run_estimate(cfg, est_cfg, boot, out)
        if out is None:
            return 0
    extra = {"policy_standardization": "train_mean_std"} if args.command == "empirical" else None
    reports.write_manifest(out, args.command, _echo(cfg), seed, est_cfg.weight_formula,
                           match_mode, extra)
    return 0


def _parse_treated_size(text):
    if text is None:
        return None
    try:
        if ":" in str(text):
            lo, hi = str(text).split(":")
            return int(lo), int(hi)
        return int(text)
    except ValueError as exc:
        raise UsageError(f"--treated-size must be N or LO:HI, got {text!r}") from exc


def _run_empirical(cfg, est_cfg, boot, threads, out):
    if cfg["data"] is None and cfg["synthetic"] is None:
        raise UsageError("empirical needs --data PATH or --synthetic ROWS")
    table7 = cfg["mode"] == "table7"
    over = {
        "n_iterations": cfg["iterations"] or (100 if table7 else 1000),
        "treated_size": _parse_treated_size(cfg["treated_size"]) or ((50, 80) if table7 else 100),
        "train_fraction": cfg["train_fraction"] or (0.1 if table7 else 0.5),
        "score_noise": cfg["score_noise"] or ("uniform01" if table7 else "none"),
        "n_policy_features": cfg["policy_features"],
        "n_selected_features": cfg["selected_features"],
        "seed": cfg["seed"],
    }
    try:
        study_cfg = EmpiricalStudyConfig(**over)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if cfg["data"] is not None:
        table = load_creditcard_csv(cfg["data"])
    else:
        table = synthetic_fraud_table(cfg["synthetic"], seed=cfg["seed"])
    if table7:
        report = run_empirical_coverage(table, study_cfg, DEFAULT_ESTIMATORS, boot, est_cfg, threads)
        reports.write_coverage(report, out)
    else:
        report = run_empirical_study(table, study_cfg, DEFAULT_ESTIMATORS, est_cfg, threads)
        reports.write_study(report, out)


def _run_estimate(cfg, est_cfg, boot, out):
    if not cfg["data"]:
        raise UsageError("estimate needs --data PATH")
    names = [s for s in str(cfg["estimators"]).split(",") if s.strip()]
    if not names:
        raise UsageError("--estimators must list at least one estimator")
    try:
        estimators = [EstimatorId.parse(s) for s in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dataset, observed_treated = load_dataset_csv(cfg["data"])
    if observed_treated:
        log.warning("%d treated rows carry an outcome; it is ignored for estimation",
                    observed_treated)
    dataset = dataset.masked()
    found, errors = bootstrap_all(dataset, estimators, boot, est_cfg)
    doc = {
        "n": dataset.n,
        "n_treated": dataset.n_treated,
        "results": [found[e.name].result().to_dict() for e in estimators if e.name in found],
        "errors": {e.name: errors[e.name] for e in estimators if e.name in errors},
    }
    if out is None:
        json.dump(reports._clean(doc), sys.stdout, indent=2, allow_nan=False)
        sys.stdout.write("\n")
    else:
        os.makedirs(out, exist_ok=True)
        reports.dump_json(doc, os.path.join(out, "estimates.json"))


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fprest: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, FileNotFoundError, OSError, ValueError, RuntimeError) as exc:
        print(f"fprest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
