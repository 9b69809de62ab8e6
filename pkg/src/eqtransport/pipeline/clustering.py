"""Rank clusters per period: even-sized splits and Fisher–Jenks natural breaks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EVEN = "even"
JENKS = "jenks"


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Cluster index per ``(period, entity)``; 0 is the best cluster."""

    labels: dict
    n_clusters: int
    method: str
    breaks: tuple = field(default=())

    def __post_init__(self):
        for k, v in self.labels.items():
            if not 0 <= v < self.n_clusters:
                raise ValueError(f"label {v} of {k} outside [0, {self.n_clusters})")

    @property
    def periods(self) -> list:
        return sorted({p for p, _ in self.labels})

    def entities(self, period=None) -> list:
        return sorted({e for p, e in self.labels if period is None or p == period})

    def __getitem__(self, key) -> int:
        return self.labels[key]

    def sizes(self, period) -> np.ndarray:
        out = np.zeros(self.n_clusters, dtype=int)
        for (p, _), v in self.labels.items():
            if p == period:
                out[v] += 1
        return out

    def paths(self, periods, entities=None):
        """Cluster paths of entities observed in every period, sorted by entity id.

        Returns ``(entities, array of shape (N, len(periods)))``.
        """
        periods = list(periods)
        if entities is None:
            entities = [e for e in self.entities() if all((p, e) in self.labels for p in periods)]
        arr = np.array([[self.labels[(p, e)] for p in periods] for e in entities], dtype=int)
        return list(entities), arr.reshape(len(entities), len(periods))


def _as_period_map(values):
    out = {}
    for p, d in values.items():
        out[p] = {str(e): float(v) for e, v in d.items()}
    return out


def even_clusters(values: dict, n: int, higher_is_better: bool = True) -> ClusterAssignment:
    """Split each period's ranking into ``n`` contiguous groups of near-equal size.

    Parameters
    ----------
    values : dict
        ``{period: {entity_id: value}}``.
    n : int
        Number of clusters.
    higher_is_better : bool
        Rank in descending value order when true.

    Returns
    -------
    ClusterAssignment
        Groups have ``m // n`` or ``m // n + 1`` members, larger groups
        first; equal values are ordered by entity id.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    labels = {}
    for p, d in sorted(_as_period_map(values).items()):
        m = len(d)
        if m < n:
            raise ValueError(f"period {p}: {m} entities for {n} clusters")
        sign = -1.0 if higher_is_better else 1.0
        order = sorted(d, key=lambda e: (sign * d[e], e))
        q, r = divmod(m, n)
        sizes = [q + 1] * r + [q] * (n - r)
        idx = np.repeat(np.arange(n), sizes)
        for e, c in zip(order, idx):
            labels[(p, e)] = int(c)
    return ClusterAssignment(labels, n, EVEN)


def fisher_jenks_breaks(values, n: int):
    """Optimal class boundaries minimizing the within-class sum of squares.

    Equal values always share a class. Returns the sorted distinct values
    and, for each class ``k``, the index into them where class ``k`` starts.
    """
    v = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    u, w = np.unique(v, return_counts=True)
    m = u.size
    if n < 1:
        raise ValueError("n must be at least 1")
    if m < n:
        raise ValueError(f"{m} distinct values for {n} classes")
    w = w.astype(float)
    s0 = np.concatenate([[0.0], np.cumsum(w)])
    s1 = np.concatenate([[0.0], np.cumsum(w * u)])
    s2 = np.concatenate([[0.0], np.cumsum(w * u * u)])

    def sse(i, j):  # classes u[i:j], vectorized over i
        cnt = s0[j] - s0[i]
        tot = s1[j] - s1[i]
        return np.maximum(s2[j] - s2[i] - tot * tot / cnt, 0.0)

    cost = np.full((n, m + 1), np.inf)
    arg = np.zeros((n, m + 1), dtype=int)
    cost[0, 1:] = sse(np.zeros(m, dtype=int), np.arange(1, m + 1))
    for k in range(1, n):
        for j in range(k + 1, m + 1):
            i = np.arange(k, j)
            c = cost[k - 1, i] + sse(i, j)
            b = int(np.argmin(c))
            cost[k, j] = c[b]
            arg[k, j] = i[b]
    starts = [0] * n
    j = m
    for k in range(n - 1, 0, -1):
        starts[k] = arg[k, j]
        j = starts[k]
    return u, tuple(int(s) for s in starts)


def within_class_ss(values, labels) -> float:
    v = np.asarray(values, dtype=float)
    lab = np.asarray(labels)
    return float(sum(((v[lab == c] - v[lab == c].mean()) ** 2).sum() for c in np.unique(lab)))


def jenks_clusters(values: dict, n: int, higher_is_better: bool = True, log: bool = False,
                   pooled: bool = True) -> ClusterAssignment:
    """Natural-breaks clusters.

    Parameters
    ----------
    values : dict
        ``{period: {entity_id: value}}``.
    n : int
        Number of classes.
    higher_is_better : bool
        Class 0 holds the largest values when true, the smallest otherwise.
    log : bool
        Classify ``log(value)`` (values must be positive).
    pooled : bool
        One set of breaks fitted on all periods together (default), or
        separate breaks per period.
    """
    vals = _as_period_map(values)
    if log:
        for p, d in vals.items():
            for e, x in d.items():
                if x <= 0:
                    raise ValueError(f"log transform needs positive values ({e!r}, {p})")
                d[e] = float(np.log(x))
    groups = [sorted(vals)] if pooled else [[p] for p in sorted(vals)]
    labels, breaks = {}, []
    for ps in groups:
        pool = [x for p in ps for x in vals[p].values()]
        u, starts = fisher_jenks_breaks(pool, n)
        lower = u[list(starts)]
        breaks.append(tuple(float(b) for b in lower))
        for p in ps:
            for e, x in vals[p].items():
                c = int(np.searchsorted(lower, x, side="right") - 1)
                labels[(p, e)] = n - 1 - c if higher_is_better else c
    return ClusterAssignment(labels, n, JENKS, tuple(breaks))


def cluster_panel(panel, column: str, n: int, method: str = EVEN, log: bool = False,
                  pooled: bool = True) -> ClusterAssignment:
    """Cluster one panel column (``size_value`` or ``wage_value``) per period."""
    values = {}
    for r in panel.records:
        values.setdefault(r.period, {})[r.entity_id] = getattr(r, column)
    higher = panel.size_higher_better if column == "size_value" else panel.wage_higher_better
    if method == EVEN:
        return even_clusters(values, n, higher)
    if method == JENKS:
        return jenks_clusters(values, n, higher, log=log, pooled=pooled)
    raise ValueError(f"unknown cluster method {method!r}")
