"""Plain CSV / JSON writers with deterministic formatting (no timestamps)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _num(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) or v is None else v for v in row])


def write_matrix(path, matrix, labels=None) -> None:
    m = np.asarray(matrix, dtype=float)
    labels = list(range(m.shape[1])) if labels is None else list(labels)
    write_rows(path, ["from"] + [str(c) for c in labels],
               [[labels[i]] + [float(v) for v in m[i]] for i in range(m.shape[0])])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)


def write_curve(path, curve) -> None:
    den = curve.denoised if curve.denoised is not None else [None] * len(curve.alphas)
    write_rows(path, ["alpha", "distance", "normalized_distance", "denoised_distance"],
               [[float(a), float(d), float(n), None if z is None else float(z)]
                for a, d, n, z in zip(curve.alphas, curve.distances, curve.normalized_distances, den)])


def write_cluster_selection(path, diagnostics) -> None:
    sectors = sorted(diagnostics[0]["discrepancy"]) if diagnostics else []
    write_rows(path, ["n_clusters", "spearman", "spearman_p", "kendall", "kendall_p"]
               + [f"discrepancy_{s}" for s in sectors],
               [[d["n_clusters"], d["spearman"], d["spearman_p"], d["kendall"], d["kendall_p"]]
                + [float(d["discrepancy"][s]) for s in sectors] for d in diagnostics])


def write_efficiency(path, rows) -> None:
    """``rows``: iterable of ``(sector, spearman, spearman_p, kendall, kendall_p, n_obs)``."""
    write_rows(path, ["sector", "spearman", "spearman_p", "kendall", "kendall_p", "n_obs"], rows)
