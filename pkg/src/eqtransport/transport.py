"""Discrete transport solvers.

Exact linear transport goes through the network simplex of POT. Composite
objectives (linear + convex function of a scalar moment + optional
f-divergence) use away-step Frank-Wolfe with the exact solver as the
linear-minimization oracle.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

# POT probes every array backend at import time; only numpy is used here.
for _key in (
    "POT_BACKEND_DISABLE_PYTORCH",
    "POT_BACKEND_DISABLE_TENSORFLOW",
    "POT_BACKEND_DISABLE_JAX",
    "POT_BACKEND_DISABLE_CUPY",
):
    os.environ.setdefault(_key, "1")

from ot import emd as _emd  # noqa: E402

from .divergences import DivergenceKind, f_eval, f_prime, f_second  # noqa: E402

MARGINAL_TOL = 1e-9
FW_TOL = 1e-8
FW_MAX_ITER = 10_000
# iterations before a stalled G-only solve switches to the parametric solution
PARAMETRIC_AFTER = 200


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to certify its tolerance."""

    def __init__(self, message, best_gap=None):
        super().__init__(message)
        self.best_gap = best_gap


@dataclass(frozen=True, eq=False)
class Coupling:
    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def violation(self) -> float:
        """Largest marginal error (negative entries count as violations)."""
        m = self.matrix
        return max(
            float(np.abs(m.sum(axis=1) - self.row_marginal).max(initial=0.0)),
            float(np.abs(m.sum(axis=0) - self.col_marginal).max(initial=0.0)),
            float(-m.min(initial=0.0)),
        )

    def is_feasible(self, tol: float = MARGINAL_TOL) -> bool:
        return self.violation() <= tol


def independent_coupling(a, b) -> np.ndarray:
    return np.outer(a, b)


def _check_marginals(a, b):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("marginals must be vectors")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise ValueError(f"marginal masses differ: {a.sum()!r} vs {b.sum()!r}")
    return a, b


def solve_linear_ot(row_marginal, col_marginal, cost_matrix, log=False):
    """Exact transportation LP ``min <C, P>`` over couplings of the marginals.

    Parameters
    ----------
    row_marginal, col_marginal : array-like, shape (m,), (n,)
        Nonnegative weights with equal mass (zero entries allowed).
    cost_matrix : array-like, shape (m, n)
    log : bool
        Also return a dict with the dual potentials ``u``, ``v``.

    Returns
    -------
    value : float
    coupling : Coupling
    """
    a, b = _check_marginals(row_marginal, col_marginal)
    C = np.ascontiguousarray(cost_matrix, dtype=float)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost matrix shape {C.shape} does not match marginals")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    # POT's network simplex can report an all-negative cost matrix as infeasible;
    # a constant shift leaves the optimal coupling unchanged
    shift = float(C.min()) if C.size else 0.0
    P, info = _emd(a, b, C - shift, numItermax=10_000_000, log=True)
    if info["warning"] is not None:
        raise SolverError(f"network simplex: {info['warning']}")
    P = np.asarray(P)
    value = float(np.sum(P * C))
    coupling = Coupling(P, a, b)
    if log:
        return value, coupling, {"u": np.asarray(info["u"]) + shift, "v": np.asarray(info["v"])}
    return value, coupling


@dataclass(frozen=True, eq=False)
class FDivTerm:
    """f-divergence of a one-step coupling glued to fixed tail laws.

    For entry ``e`` with reference mass ``rho[e]`` the term is

        rho[e] * ( sum_k tail_rho[k] * f(gamma[e] * tail_ratio[k] / rho[e])
                   + zero_mass[e] * f(0) )

    where ``k`` ranges over tails attached to ``e`` (``tail_entry[k] == e``),
    ``tail_rho`` is the reference law of the tail and ``tail_ratio`` the
    density ratio of the fixed future plan against it. Tails where the
    future plan has no mass are lumped into ``zero_mass``.
    """

    kind: DivergenceKind
    rho: np.ndarray
    tail_entry: np.ndarray
    tail_rho: np.ndarray
    tail_ratio: np.ndarray
    zero_mass: np.ndarray

    @classmethod
    def one_step(cls, kind, rho):
        """Divergence of the coupling itself against ``rho`` (no tails)."""
        rho = np.asarray(rho, dtype=float)
        entries = np.flatnonzero(rho.ravel() > 0)
        ones = np.ones(entries.size)
        return cls(DivergenceKind(kind), rho, entries, ones, ones, np.zeros(rho.size))

    def value(self, gamma) -> float:
        g = np.asarray(gamma, dtype=float).ravel()
        rho = self.rho.ravel()
        e = self.tail_entry
        x = g[e] * self.tail_ratio / rho[e]
        per_tail = rho[e] * self.tail_rho * f_eval(self.kind, x)
        total = per_tail.sum() + np.sum(rho * self.zero_mass) * float(f_eval(self.kind, 0.0))
        return float(total)

    def gradient(self, gamma) -> np.ndarray:
        g = np.asarray(gamma, dtype=float).ravel()
        rho = self.rho.ravel()
        e = self.tail_entry
        x = g[e] * self.tail_ratio / rho[e]
        w = self.tail_rho * self.tail_ratio * f_prime(self.kind, x)
        return np.bincount(e, weights=w, minlength=g.size).reshape(np.shape(gamma))

    def hessian_diag(self, gamma) -> np.ndarray:
        g = np.asarray(gamma, dtype=float).ravel()
        rho = self.rho.ravel()
        e = self.tail_entry
        x = g[e] * self.tail_ratio / rho[e]
        w = self.tail_rho * self.tail_ratio**2 / rho[e] * f_second(self.kind, x)
        return np.bincount(e, weights=w, minlength=g.size).reshape(np.shape(gamma))


def _numeric_derivative(G):
    def dG(s):
        h = 1e-3 * max(1.0, abs(s))
        return (-G(s + 2 * h) + 8 * G(s + h) - 8 * G(s - h) + G(s - 2 * h)) / (12 * h)

    return dG


def solve_composite_ot(
    row_marginal,
    col_marginal,
    linear_cost,
    scalar_g=None,
    G: Callable[[float], float] | None = None,
    dG: Callable[[float], float] | None = None,
    fdiv: FDivTerm | None = None,
    tol: float = FW_TOL,
    max_iter: int = FW_MAX_ITER,
    log: bool = False,
):
    r"""Minimize a convex composite objective over couplings.

    .. math::
        F(\gamma) = \langle L, \gamma\rangle + G(\langle g, \gamma\rangle)
                    + D_f(\gamma)

    by away-step Frank-Wolfe started at the independent coupling, with exact
    line search and :func:`solve_linear_ot` as linear-minimization oracle.
    Stops once the Frank-Wolfe duality gap is at most ``tol``. Without a
    divergence term, a solve still open after ``PARAMETRIC_AFTER`` iterations
    restarts from the exact parametric-LP solution.

    Returns ``(value, coupling)``, plus a log dict (``gap``, ``n_iter``,
    ``values``) when ``log`` is set.
    """
    a, b = _check_marginals(row_marginal, col_marginal)
    L = np.asarray(linear_cost, dtype=float)
    if L.shape != (a.size, b.size):
        raise ValueError("linear cost shape does not match marginals")
    use_G = G is not None
    if use_G:
        g = np.asarray(scalar_g, dtype=float)
        if g.shape != L.shape:
            raise ValueError("scalar_g shape does not match marginals")
        dG = dG if dG is not None else _numeric_derivative(G)

    def objective(x):
        val = float(np.sum(L * x))
        if use_G:
            val += float(G(float(np.sum(g * x))))
        if fdiv is not None:
            val += fdiv.value(x)
        return val

    def gradient(x):
        grad = L.copy()
        if use_G:
            grad = grad + float(dG(float(np.sum(g * x)))) * g
        if fdiv is not None:
            grad = grad + fdiv.gradient(x)
        return grad

    def curvature(x):
        # second derivative of G along g, for the Newton model
        if not use_G:
            return 0.0, None
        s0 = float(np.sum(g * x))
        h = 1e-4 * max(1.0, abs(s0))
        return (float(dG(s0 + h)) - float(dG(s0 - h))) / (2 * h), g

    x = independent_coupling(a, b)
    fx = objective(x)
    if not np.isfinite(fx):
        raise SolverError("objective is not finite at the independent coupling")

    # active set: list of [vertex, weight]; the start point is an atom itself
    atoms = [[x.copy(), 1.0]]
    values = [fx]
    best_gap = np.inf
    for it in range(max_iter + 1):
        grad = gradient(x)
        _, s_cpl = solve_linear_ot(a, b, grad)
        s = s_cpl.matrix
        gap = float(np.sum(grad * (x - s)))
        best_gap = min(best_gap, gap)
        if gap <= tol:
            break
        if it == PARAMETRIC_AFTER and use_G and fdiv is None:
            # away steps can zigzag along a degenerate optimal edge; jump to the
            # exact solution of the parametric problem and keep polishing from there
            jump = _parametric_solution(a, b, L, g, dG, objective, gradient)
            if jump is not None and jump[0] < fx:
                fx, x, atoms = jump
                values.append(fx)
                continue
        if it == max_iter:
            raise SolverError(
                f"Frank-Wolfe did not reach gap {tol:g} in {max_iter} iterations",
                best_gap=best_gap,
            )
        if fdiv is not None:
            x_new = _newton_face_step(x, grad, fdiv.hessian_diag(x), gradient, curvature)
            if x_new is not None:
                f_new = objective(x_new)
                if f_new < fx:
                    x, fx = x_new, f_new
                    atoms = [[x.copy(), 1.0]]
                    values.append(fx)
                    continue
        scores = [float(np.sum(grad * v)) for v, _ in atoms]
        j = int(np.argmax(scores))
        away_gap = scores[j] - float(np.sum(grad * x))
        if gap >= away_gap or len(atoms) == 1:
            d = s - x
            eta_max = 1.0
            away = False
        else:
            w = atoms[j][1]
            d = x - atoms[j][0]
            eta_max = w / (1.0 - w)
            away = True

        eta = _line_search(gradient, x, d, eta_max)
        if eta <= 0.0:
            # numerical stall: accept when the remaining gap is tiny
            if gap <= 10 * tol:
                break
            raise SolverError("Frank-Wolfe line search stalled", best_gap=best_gap)
        x = x + eta * d
        if away:
            for atom in atoms:
                atom[1] *= 1.0 + eta
            atoms[j][1] -= eta
            if eta >= eta_max or atoms[j][1] <= 1e-15:
                atoms.pop(j)
        else:
            for atom in atoms:
                atom[1] *= 1.0 - eta
            if eta >= 1.0:
                atoms = [[s, 1.0]]
            else:
                for atom in atoms:
                    if np.array_equal(atom[0], s):
                        atom[1] += eta
                        break
                else:
                    atoms.append([s, eta])
        x = np.maximum(x, 0.0)
        fx = objective(x)
        values.append(fx)

    value = objective(x)
    coupling = Coupling(x, a, b)
    if log:
        return value, coupling, {"gap": gap, "n_iter": it, "values": values}
    return value, coupling


def _parametric_solution(a, b, L, g, dG, objective, gradient, n_bisect=200):
    """Minimizer of ``<L, x> + G(<g, x>)`` via the multiplier ``lam = G'(<g, x>)``.

    For fixed ``lam`` the LP over ``L + lam * g`` has a vertex solution whose
    ``<g, x>`` is nonincreasing in ``lam``; bisection brackets the fixed point
    and the optimum lies on the segment between the two bracketing vertices.
    Returns ``(value, x, atoms)`` or ``None`` if the bracket is not finite.
    """

    def vertex(lam):
        return solve_linear_ot(a, b, L + lam * g)[1].matrix

    s_hi = float(np.sum(g * solve_linear_ot(a, b, -g)[1].matrix))
    s_lo = float(np.sum(g * solve_linear_ot(a, b, g)[1].matrix))
    lo, hi = float(dG(s_lo)) - 1.0, float(dG(s_hi)) + 1.0
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return None
    x_lo, x_hi = vertex(lo), vertex(hi)
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        x_mid = vertex(mid)
        if mid - float(dG(float(np.sum(g * x_mid)))) < 0.0:
            lo, x_lo = mid, x_mid
        else:
            hi, x_hi = mid, x_mid
    d = x_lo - x_hi
    theta = _line_search(gradient, x_hi, d, 1.0) if np.any(d) else 0.0
    x = np.maximum(x_hi + theta * d, 0.0)
    atoms = [[v, w] for v, w in ((x_hi, 1.0 - theta), (x_lo, theta)) if w > 0.0]
    return objective(x), x, atoms


def _newton_face_step(x, grad, hdiag, gradient, curvature, floor=1e-14):
    """Newton step restricted to the face of the current support.

    The step keeps every row and column sum fixed and is clipped so that the
    iterate stays nonnegative. Returns ``None`` if no descent direction exists.
    """
    m, n = x.shape
    support = np.flatnonzero(x.ravel() > floor)
    if support.size < 2:
        return None
    rows, cols = np.divmod(support, n)
    k = support.size
    dinv = 1.0 / np.maximum(hdiag.ravel()[support], 1e-300)
    c2, g = curvature(x)
    gs = g.ravel()[support] if (g is not None and c2 > 0) else None

    def h_solve(r):
        # (D + c2 g g^T)^{-1} r via Sherman-Morrison
        out = dinv * r
        if gs is not None:
            dg = dinv * gs
            out = out - dg * (c2 * np.dot(gs, out) / (1.0 + c2 * np.dot(gs, dg)))
        return out

    A = np.zeros((m + n, k))
    A[rows, np.arange(k)] = 1.0
    A[m + cols, np.arange(k)] = 1.0
    grad_s = grad.ravel()[support]
    hinv_at = np.column_stack([h_solve(A[i]) for i in range(m + n)])
    schur = A @ hinv_at
    lam = np.linalg.lstsq(schur, -A @ h_solve(grad_s), rcond=None)[0]
    d = np.zeros(x.size)
    d[support] = -h_solve(grad_s + A.T @ lam)
    d = d.reshape(x.shape)
    if abs(d.sum(axis=1)).max() > 1e-12 or abs(d.sum(axis=0)).max() > 1e-12:
        return None
    if float(np.sum(grad * d)) >= 0.0:
        return None
    neg = d < 0
    eta_max = float(np.min(-x[neg] / d[neg])) if np.any(neg) else np.inf
    eta_max = min(eta_max, 2.0)
    eta = _line_search(gradient, x, d, eta_max)
    if eta <= 0.0:
        return None
    return np.maximum(x + eta * d, 0.0)


def _line_search(gradient, x, d, eta_max, n_bisect=80):
    """Exact line search for a convex objective via bisection on the slope."""

    def slope(eta):
        return float(np.sum(gradient(x + eta * d) * d))

    if slope(0.0) >= 0.0:
        return 0.0
    if slope(eta_max) <= 0.0:
        return eta_max
    lo, hi = 0.0, eta_max
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def entropic_ot(a, b, C, tol=1e-14, max_iter=100_000):
    """Log-domain Sinkhorn for ``min <C,P> + KL(P | a x b)``.

    Cross-check solver only. Returns ``(value, P)``; the value includes the KL term.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    C = np.asarray(C, float)
    ia, ib = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    a_s, b_s, C_s = a[ia], b[ib], C[np.ix_(ia, ib)]
    u = np.zeros(ia.size)
    v = np.zeros(ib.size)
    la, lb = np.log(a_s), np.log(b_s)
    for _ in range(max_iter):
        u = -_logsumexp(lb[None, :] + v[None, :] - C_s, axis=1)
        v = -_logsumexp(la[:, None] + u[:, None] - C_s, axis=0)
        P_s = np.exp(la[:, None] + lb[None, :] + u[:, None] + v[None, :] - C_s)
        if np.abs(P_s.sum(axis=1) - a_s).max() < tol:
            break
    P = np.zeros_like(C)
    P[np.ix_(ia, ib)] = P_s
    value = float(np.dot(a_s, u) + np.dot(b_s, v))
    return value, P


def _logsumexp(z, axis):
    zmax = z.max(axis=axis, keepdims=True)
    return np.squeeze(zmax, axis=axis) + np.log(np.exp(z - zmax).sum(axis=axis))


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """Finite weighted set of path pairs ``(x_{1:T}, y_{1:T})``.

    ``x`` and ``y`` hold state indices, shape (N, T); ``x_values`` and
    ``y_values`` map indices to the state labels used by ground costs.
    Duplicate atoms are merged on construction, and atoms are stored in
    lexicographic order of ``(x, y)``.
    """

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.int64))
        y = np.atleast_2d(np.asarray(self.y, dtype=np.int64))
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.shape != y.shape or x.shape[0] != w.size:
            raise ValueError("x, y and weights must describe the same atoms")
        if np.any(w < 0):
            raise ValueError("atom weights must be nonnegative")
        if w.size:
            keys, inverse = np.unique(np.hstack([x, y]), axis=0, return_inverse=True)
            w = np.bincount(inverse.ravel(), weights=w, minlength=keys.shape[0])
            T = x.shape[1]
            x, y = keys[:, :T], keys[:, T:]
        for name, arr in (("x", x), ("y", y), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "x_values", np.asarray(self.x_values, dtype=float))
        object.__setattr__(self, "y_values", np.asarray(self.y_values, dtype=float))

    def __len__(self):
        return self.weights.size

    @property
    def horizon(self) -> int:
        return self.x.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_normalized(self) -> bool:
        return abs(self.total_mass - 1.0) <= MARGINAL_TOL

    def normalized(self) -> "PathMeasure":
        return PathMeasure(self.x, self.y, self.weights / self.total_mass, self.x_values, self.y_values)

    def atoms(self):
        """Iterate ``(x_path, y_path, weight)`` with tuple paths."""
        for k in range(len(self)):
            yield tuple(int(s) for s in self.x[k]), tuple(int(s) for s in self.y[k]), float(self.weights[k])

    def as_dict(self) -> dict:
        return {(xp, yp): w for xp, yp, w in self.atoms()}


def path_ground_cost(P: PathMeasure, Q: PathMeasure) -> np.ndarray:
    """``sum_t |x_t - x'_t| + |y_t - y'_t|`` between all atom pairs, on state labels."""
    xp, yp = P.x_values[P.x], P.y_values[P.y]
    xq, yq = Q.x_values[Q.x], Q.y_values[Q.y]
    return (
        np.abs(xp[:, None, :] - xq[None, :, :]).sum(axis=2)
        + np.abs(yp[:, None, :] - yq[None, :, :]).sum(axis=2)
    )


def path_wasserstein(P: PathMeasure, Q: PathMeasure) -> float:
    """Exact order-1 Wasserstein distance between two path measures.

    The ground cost sums the absolute label differences of both coordinates
    over all periods.
    """
    if not (P.is_normalized and Q.is_normalized):
        raise ValueError("path_wasserstein requires normalized path measures")
    if P.horizon != Q.horizon:
        raise ValueError("path measures have different horizons")
    value, _ = solve_linear_ot(P.weights, Q.weights, path_ground_cost(P, Q))
    return max(value, 0.0)
