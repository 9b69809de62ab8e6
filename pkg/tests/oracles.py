"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar


def transport_vertices(a, b):
    """All vertices of the transportation polytope by basis enumeration."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    m, n = a.size, b.size
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    rhs = np.concatenate([a, b])
    out = []
    for cols in itertools.combinations(range(m * n), m + n - 1):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < m + n - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.abs(sub @ x - rhs).max() > 1e-10 or x.min() < -1e-12:
            continue
        P = np.zeros(m * n)
        P[list(cols)] = np.maximum(x, 0.0)
        P = P.reshape(m, n)
        if not any(np.abs(P - Q).max() < 1e-12 for Q in out):
            out.append(P)
    return out


def lp_min_by_vertices(a, b, C):
    vals = [(float(np.sum(C * P)), P) for P in transport_vertices(a, b)]
    return min(vals, key=lambda v: v[0])


def coupling_2x2(a, b, p):
    return np.array([[p, a[0] - p], [b[0] - p, 1.0 - a[0] - b[0] + p]])


def min_2x2(a, b, objective, n_grid=20001):
    """Dense grid over the 2x2 coupling segment, then a bounded refinement."""
    lo, hi = max(0.0, a[0] + b[0] - 1.0), min(a[0], b[0])
    if hi <= lo:
        P = np.maximum(coupling_2x2(a, b, lo), 0.0)
        return objective(P), P
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([objective(np.maximum(coupling_2x2(a, b, p), 0.0)) for p in grid])
    k = int(np.argmin(vals))
    l, r = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    res = minimize_scalar(lambda p: objective(np.maximum(coupling_2x2(a, b, p), 0.0)),
                          bounds=(l, r), method="bounded", options={"xatol": 1e-13})
    best = min((vals[k], grid[k]), (res.fun, res.x))
    P = np.maximum(coupling_2x2(a, b, best[1]), 0.0)
    return float(best[0]), P


def tv_qp(y, lam):
    """Total-variation prox through its box-constrained dual, solved by BVLS."""
    y = np.asarray(y, float)
    n = y.size
    if n < 2 or lam == 0:
        return y.copy()
    D = np.diff(np.eye(n), axis=0)
    res = lsq_linear(D.T, y, bounds=(-lam, lam), method="bvls", tol=1e-15, lsmr_tol="auto")
    return y - D.T @ res.x


def naive_spearman(x, y):
    def midranks(v):
        v = np.asarray(v, float)
        r = np.empty(v.size)
        for i in range(v.size):
            less = np.sum(v < v[i])
            eq = np.sum(v == v[i])
            r[i] = less + (eq + 1) / 2.0
        return r

    rx, ry = midranks(x), midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.sum(rx * ry) / np.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))


def naive_kendall_b(x, y):
    n = len(x)
    con = dis = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = np.sign(x[j] - x[i])
            dy = np.sign(y[j] - y[i])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx == dy:
                con += 1
            else:
                dis += 1
    return (con - dis) / np.sqrt((con + dis + tx) * (con + dis + ty))


def exhaustive_jenks(values, n):
    """Best within-class sum of squares over all break placements on sorted distinct values."""
    u, w = np.unique(np.asarray(values, float), return_counts=True)
    best = np.inf
    for cuts in itertools.combinations(range(1, u.size), n - 1):
        edges = (0,) + cuts + (u.size,)
        ss = 0.0
        for s, e in zip(edges[:-1], edges[1:]):
            vv, ww = u[s:e], w[s:e]
            m = np.sum(vv * ww) / ww.sum()
            ss += float(np.sum(ww * (vv - m) ** 2))
        best = min(best, ss)
    return best
