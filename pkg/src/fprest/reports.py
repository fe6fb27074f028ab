"""CSV/JSON writers for study outputs and the run manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
from importlib import metadata

from .bootstrap import CoverageReport, ratio_histogram
from .simgen import StudyReport

MANIFEST_NAME = "manifest.json"


def _clean(obj):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_study(report: StudyReport, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    metrics_csv = os.path.join(out_dir, "metrics.csv")
    _write_csv(metrics_csv, ["estimator", "bias", "rmse", "mae", "n_used", "n_failed"],
               [(r.estimator, r.bias, r.rmse, r.mae, r.n_used, r.n_failed) for r in report.rows])
    metrics_json = os.path.join(out_dir, "metrics.json")
    dump_json(report.to_dict(), metrics_json)
    scatter_csv = os.path.join(out_dir, "scatter.csv")
    _write_csv(scatter_csv, ["estimator", "iteration", "truth", "estimate"], report.scatter)
    return [metrics_csv, metrics_json, scatter_csv]


def write_coverage(report: CoverageReport, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "coverage.json")]
    dump_json(report.to_dict(), paths[0])
    summary = os.path.join(out_dir, "coverage.csv")
    _write_csv(summary, ["estimator", "coverage_rate", "n_used", "n_failed"],
               [(k, v.coverage_rate, v.n_used, v.n_failed) for k, v in report.per_estimator.items()])
    paths.append(summary)
    for name, cov in report.per_estimator.items():
        edges, counts = ratio_histogram(cov.error_over_se)
        path = os.path.join(out_dir, f"hist_{name}.csv")
        _write_csv(path, ["bin_lo", "bin_hi", "count"],
                   [(float(edges[j]), float(edges[j + 1]), int(counts[j])) for j in range(len(counts))])
        paths.append(path)
    return paths


def library_version() -> str:
    try:
        return metadata.version("fprest")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out_dir, command: str, config: dict, seed: int, weight_formula: str,
                   match_mode: str, extra: dict | None = None) -> str:
    """One manifest per output directory; everything but the timestamp is a
    function of the inputs."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "weight_formula": weight_formula,
        "match_mode": match_mode,
        "library_version": library_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, MANIFEST_NAME)
    dump_json(doc, path)
    return path
