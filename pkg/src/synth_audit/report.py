"""JSON report and CSV emitters.

report.json layout::

    {
      "schema_version": 1,
      "command": "audit",
      "runs": [{"seed": s, "attackers": {name: {auc, accuracy_at_median,
                precision_curve: [[q, p], ...], subgroup?: {...}}},
                "utility": {"wasserstein_to_holdout": w}}],
      "aggregate": {name: {"auc_mean", "auc_std", "accuracy_mean", "accuracy_std"}},
      "metadata": {...}
    }

Output is deterministic: keys sorted, floats written as shortest round-trip ``repr``, and no
wall-clock timestamps.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .numcore import SeededRng

SCHEMA_VERSION = 1


def metadata(cfg: RunConfig, command: str) -> dict:
    return {
        "software": {"package": "synth_audit", "version": __version__, "numpy": np.__version__},
        "command": command,
        "config": cfg.to_dict(),
        "seeds": list(cfg.seeds),
        "rng": {"algorithm": SeededRng.algorithm, "child_derivation": "SeedSequence(seed, spawn_key=(index,))"},
        "optimizer": {"name": "adam", "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
        "conventions": {
            "standardization": "population std, fit on D_ref only" if cfg.data.standardize else "none",
            "dequantization_jitter": cfg.data.dequantize,
            "domias_score": "log p_G(x) - log p_R(x)",
            "auc_ties": "count 1/2 (Mann-Whitney)",
            "median_threshold": "mean of middle two for even n; member iff score > median",
            "precision_quantile": "top ceil(q*n) rows by score, ties in input order",
            "mc_epsilon_default": "median nearest-neighbour distance within D_syn",
            "ganleaks_k_default": "all synthetic rows",
            "kde_bandwidth_default": "Scott: n^(-1/(d+4)) on standardized data",
            "wasserstein": "mean of per-feature 1-D W1, sorted coupling, larger set subsampled",
            "utility_holdout": "D_ref",
            "subgroup_accuracy": "global median threshold restricted to group rows",
        },
    }


def run_entry(result) -> dict:
    return {
        "seed": result.seed,
        "attackers": result.metrics,
        "utility": {"wasserstein_to_holdout": result.utility},
    }


def aggregate(results) -> dict:
    out = {}
    for name in results[0].metrics:
        aucs = np.array([r.metrics[name]["auc"] for r in results])
        accs = np.array([r.metrics[name]["accuracy_at_median"] for r in results])
        out[name] = {
            "auc_mean": float(aucs.mean()),
            "auc_std": float(aucs.std()),
            "accuracy_mean": float(accs.mean()),
            "accuracy_std": float(accs.std()),
        }
    return out


def build_report(cfg: RunConfig, results, command: str = "audit") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "runs": [run_entry(r) for r in results],
        "aggregate": aggregate(results),
        "metadata": metadata(cfg, command),
    }


def _check_finite(obj, path="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value at {path}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")


def dumps(report: dict) -> str:
    _check_finite(report)
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


class AtomicWriter:
    """Collects output files and moves them into place only on commit."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._pending = []

    def _tmp(self, name):
        return self.out_dir / f".{name}.tmp"

    def write_text(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmp = self._tmp(name)
        tmp.write_text(text, encoding="utf-8")
        self._pending.append((tmp, self.out_dir / name))

    def write_rows(self, name: str, header, rows):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmp = self._tmp(name)
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        self._pending.append((tmp, self.out_dir / name))

    def commit(self):
        for tmp, final in self._pending:
            os.replace(tmp, final)
        self._pending = []

    def abort(self):
        for tmp, _ in self._pending:
            tmp.unlink(missing_ok=True)
        self._pending = []
