"""Rank correlations, efficiency coefficients and cluster-count selection."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .clustering import EVEN, cluster_panel


class UndefinedCorrelationError(ValueError):
    """Correlation of a constant vector."""


class ClusterSelectionError(ValueError):
    """No candidate cluster count reaches the threshold; carries the diagnostics."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _twice_midranks(a) -> np.ndarray:
    # 2 * mid-rank is an integer, so everything downstream stays exact
    return np.rint(2 * stats.rankdata(a, method="average")).astype(np.int64)


def _pair_counts(x, y):
    """Integer counts ``(concordant - discordant, pairs, pairs untied in x, pairs untied in y)``."""
    n = x.size
    s = 0
    tx = ty = 0
    for i in range(n - 1):
        dx = np.sign(x[i + 1:] - x[i])
        dy = np.sign(y[i + 1:] - y[i])
        s += int(np.sum(dx * dy))
        tx += int(np.count_nonzero(dx))
        ty += int(np.count_nonzero(dy))
    return s, n * (n - 1) // 2, tx, ty


def _tie_sums(a):
    _, t = np.unique(a, return_counts=True)
    t = t.astype(np.int64)
    return (int(np.sum(t * (t - 1) * (2 * t + 5))), int(np.sum(t * (t - 1))),
            int(np.sum(t * (t - 1) * (t - 2))))


def spearman(x, y):
    """Tie-aware Spearman rho and its two-sided t-approximation p-value."""
    x, y = _validate(x, y)
    rx, ry = _twice_midranks(x), _twice_midranks(y)
    n = x.size
    sx, sy = int(rx.sum()), int(ry.sum())
    cov = n * int(np.dot(rx, ry)) - sx * sy
    vx = n * int(np.dot(rx, rx)) - sx * sx
    vy = n * int(np.dot(ry, ry)) - sy * sy
    rho = cov / math.sqrt(vx * vy) if vx != vy else cov / vx
    rho = min(1.0, max(-1.0, rho))
    if n <= 2 or abs(rho) == 1.0:
        p = 0.0 if n > 2 else 1.0
    else:
        t = rho * math.sqrt((n - 2) / ((1.0 - rho) * (1.0 + rho)))
        p = float(2 * stats.t.sf(abs(t), n - 2))
    return float(rho), p


def kendall(x, y):
    """Kendall tau-b and its two-sided normal-approximation p-value."""
    x, y = _validate(x, y)
    n = x.size
    s, n0, ux, uy = _pair_counts(x, y)
    tau = s / n0 if ux == uy == n0 else s / math.sqrt(ux * uy)
    tau = min(1.0, max(-1.0, tau))
    vx0, vx1, vx2 = _tie_sums(x)
    vy0, vy1, vy2 = _tie_sums(y)
    var = ((n * (n - 1) * (2 * n + 5) - vx0 - vy0) / 18.0
           + vx1 * vy1 / (2.0 * n * (n - 1))
           + (vx2 * vy2 / (9.0 * n * (n - 1) * (n - 2)) if n > 2 else 0.0))
    p = float(2 * stats.norm.sf(abs(s) / math.sqrt(var))) if var > 0 else 1.0
    return float(tau), p


def _validate(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("vectors must have equal length")
    if x.size < 3:
        raise ValueError("need at least 3 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("values must be finite")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    return x, y


def rank_correlations(x, y):
    """Spearman and Kendall rank correlations with p-values.

    Parameters
    ----------
    x, y : array-like, shape (n,)
        ``n >= 3``; neither vector constant.

    Returns
    -------
    (spearman_rho, spearman_p, kendall_tau, kendall_p)
        Spearman is the Pearson correlation of mid-ranks, Kendall is tau-b.
        Both are computed from integer counts, so untied inputs give the
        closed-form values exactly.
    """
    rho, prho = spearman(x, y)
    tau, ptau = kendall(x, y)
    return rho, prho, tau, ptau


def sale_wage_discrepancy(assign_x, assign_y) -> float:
    """Mean absolute difference of size and wage cluster indices over all entity-periods."""
    kx, ky = set(assign_x.labels), set(assign_y.labels)
    if kx != ky:
        raise ValueError(f"coverage mismatch: {len(kx ^ ky)} entity-periods present in only one assignment")
    if not kx:
        raise ValueError("empty assignments")
    keys = sorted(kx)
    d = [abs(assign_x.labels[k] - assign_y.labels[k]) for k in keys]
    return float(np.mean(d))


def efficiency_coefficient(panel, pooling: str = "pooled"):
    """Size-wage rank correlation of one sector, ``(spearman, kendall)``.

    ``pooling="pooled"`` correlates all entity-period pairs at once;
    ``"per_year"`` averages the per-period correlations.
    """
    if len(panel) == 0:
        raise ValueError("empty panel")
    sign = 1.0 if panel.size_higher_better == panel.wage_higher_better else -1.0
    if pooling == "pooled":
        r = rank_correlations(panel.values("size_value"), sign * panel.values("wage_value"))
        return r[0], r[2]
    if pooling == "per_year":
        out = []
        for p in panel.periods:
            sub = panel.filter(lambda rec, p=p: rec.period == p)
            r = rank_correlations(sub.values("size_value"), sign * sub.values("wage_value"))
            out.append((r[0], r[2]))
        return tuple(float(v) for v in np.mean(out, axis=0))
    raise ValueError(f"unknown pooling {pooling!r}")


def select_cluster_count(panels: dict, candidates, method: str = EVEN, threshold: float = -0.5,
                         correlation: str = "spearman", log_size: bool = False,
                         pooling: str = "pooled"):
    """Smallest cluster count whose discrepancy-efficiency correlation is low enough.

    Parameters
    ----------
    panels : dict
        ``{sector: Panel}`` restricted to the study window; at least 3 sectors.
    candidates : iterable of int
    method : {"even", "jenks"}
    threshold : float
        A candidate qualifies when its cross-sector correlation is at most this.
    correlation : {"spearman", "kendall"}
        Which correlation the threshold applies to.

    Returns
    -------
    (n, diagnostics)
        ``diagnostics`` is one dict per candidate with both correlations,
        p-values and the per-sector discrepancies.
    """
    if len(panels) < 3:
        raise ValueError("need at least 3 sectors")
    if correlation not in ("spearman", "kendall"):
        raise ValueError(f"unknown correlation {correlation!r}")
    sectors = sorted(panels)
    eff = np.array([efficiency_coefficient(panels[s], pooling)[0] for s in sectors])
    diagnostics, chosen = [], None
    for n in sorted(set(int(c) for c in candidates)):
        disc = []
        for s in sectors:
            ax = cluster_panel(panels[s], "size_value", n, method, log=log_size)
            ay = cluster_panel(panels[s], "wage_value", n, method)
            disc.append(sale_wage_discrepancy(ax, ay))
        try:
            rho, prho, tau, ptau = rank_correlations(disc, eff)
        except UndefinedCorrelationError:
            rho = prho = tau = ptau = float("nan")
        row = {"n_clusters": n, "spearman": rho, "spearman_p": prho, "kendall": tau, "kendall_p": ptau,
               "discrepancy": dict(zip(sectors, disc))}
        diagnostics.append(row)
        value = row[correlation]
        if chosen is None and np.isfinite(value) and value <= threshold:
            chosen = n
    if chosen is None:
        raise ClusterSelectionError(f"no candidate reaches {correlation} <= {threshold}", diagnostics)
    return chosen, diagnostics
