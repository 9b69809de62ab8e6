"""Equilibrium bi-causal plans via extended dynamic programming, and their verification.

Time ``t`` runs over 0..T-1: the time-t self observes ``(x_{1:t}, y_{1:t})``
and picks the coupling of ``(x_{t+1}, y_{t+1})``, holding the kernels of
later selves fixed. A plan is an equilibrium when no self can lower its own
cost functional by a one-step deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .costs import (
    FDivCost,
    LinearCost,
    MarkovStateForm,
    NonlinearCost,
    StateDependentCost,
)
from .divergences import divergence_from_weights
from .plans import (
    FULL,
    MARKOV,
    KernelPlan,
    history_marginals,
    product_support_histories,
)
from .transport import (
    FW_TOL,
    Coupling,
    FDivTerm,
    independent_coupling,
    solve_composite_ot,
    solve_linear_ot,
)


class UnsupportedProblemError(ValueError):
    """The requested objective is outside what the scalable solvers handle."""


@dataclass(eq=False)
class ValueTable:
    """Equilibrium values ``V_t`` per history key, with auxiliary tables.

    ``values[t]`` maps history keys (``None`` at t=0) to ``V_t``. ``aux[t]``
    holds the per-history quantities the recursion carries: ``g`` for
    nonlinear costs, ``b`` pairs ``(b(x_t, y_t, .), b(x_{t+1}, y_{t+1}, .))``
    for state-dependent ones, and ``(expected cost, divergence)`` for the
    f-divergence recursion.
    """

    mode: str
    values: list = field(default_factory=list)
    aux: list = field(default_factory=list)

    def value(self, t=0, key=None) -> float:
        return self.values[t][key]


def _labels(proc, path):
    return proc.state_values[list(path)]


def _histories(mu, nu, t):
    if t == 0:
        return [((), ())]
    return product_support_histories(mu, nu, t)


def _hkey(t, xp, yp):
    return None if t == 0 else (xp, yp)


def _step_marginals(mu, nu, xp, yp):
    return mu.conditional(xp), nu.conditional(yp)


def _entries(a, b):
    """Index pairs with positive reference mass."""
    return [(int(i), int(j)) for i in np.flatnonzero(a > 0) for j in np.flatnonzero(b > 0)]


def _finish_plan(T, layers, mode):
    initial = layers[0][None]
    kernels = [layers[t] for t in range(1, T)]
    return KernelPlan(initial, kernels, mode)


def _brute_force_2x2(a, b, objective):
    """Dense search over the one-parameter family of 2x2 couplings."""
    lo, hi = max(0.0, a[0] + b[0] - 1.0), min(a[0], b[0])

    def coupling(p):
        return np.array([[p, a[0] - p], [b[0] - p, 1.0 - a[0] - b[0] + p]])

    if hi - lo <= 0:
        P = coupling(lo)
        return objective(P), P
    grid = np.linspace(lo, hi, 4001)
    vals = np.array([objective(coupling(p)) for p in grid])
    k = int(np.argmin(vals))
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda p: objective(coupling(p)), bounds=(left, right), method="bounded",
                          options={"xatol": 1e-12})
    p = float(res.x) if res.fun < vals[k] else float(grid[k])
    P = np.maximum(coupling(p), 0.0)
    return objective(P), P


# ---------------------------------------------------------------- nonlinear


def solve_equilibrium_nonlinear(mu, nu, model: NonlinearCost, tol: float = FW_TOL):
    """Equilibrium plan for ``J_t = E[c | H_t] + G(E[h | H_t])``.

    Backward induction on full histories. With ``C_{t+1} = E[c | H_{t+1}]``
    and ``g_{t+1} = E[h | H_{t+1}]`` under the already fixed future kernels,
    each self solves

    .. math::
        \\min_\\gamma \\langle V_{t+1} - G(g_{t+1}), \\gamma \\rangle
        + G(\\langle g_{t+1}, \\gamma \\rangle)

    over couplings of the next-step conditional laws, where
    ``V_{t+1} - G(g_{t+1}) = C_{t+1}``. The boundary is
    ``V_T = c + G(h)``.

    Parameters
    ----------
    mu, nu : FiniteProcess
    model : NonlinearCost
    tol : float
        Frank-Wolfe gap of every one-step solve.

    Returns
    -------
    plan : KernelPlan (full mode)
    table : ValueTable with ``aux[t][key] = g_t``
    """
    T = min(mu.horizon, nu.horizon)
    G = model.G
    C_next, g_next = {}, {}
    V_T, aux_T = {}, {}
    for xp, yp in product_support_histories(mu, nu, T):
        xl, yl = _labels(mu, xp), _labels(nu, yp)
        C_next[(xp, yp)] = float(model.c(xl, yl))
        g_next[(xp, yp)] = float(model.h(xl, yl))
        V_T[(xp, yp)] = C_next[(xp, yp)] + float(G(g_next[(xp, yp)]))
    values = [None] * (T + 1)
    aux = [None] * (T + 1)
    values[T], aux[T] = V_T, dict(g_next)
    layers = [None] * T

    for t in range(T - 1, -1, -1):
        C_t, g_t, V_t, layer = {}, {}, {}, {}
        for xp, yp in _histories(mu, nu, t):
            a, b = _step_marginals(mu, nu, xp, yp)
            L = np.zeros((a.size, b.size))
            gm = np.zeros_like(L)
            for i, j in _entries(a, b):
                child = (xp + (i,), yp + (j,))
                L[i, j] = C_next[child]
                gm[i, j] = g_next[child]
            if model.convex:
                _, cpl = solve_composite_ot(a, b, L, scalar_g=gm, G=G, dG=model.dG, tol=tol)
                P = cpl.matrix
            elif a.size == 2 and b.size == 2:
                _, P = _brute_force_2x2(a, b, lambda P: float(np.sum(L * P) + G(float(np.sum(gm * P)))))
                cpl = Coupling(P, a, b)
            else:
                raise UnsupportedProblemError(
                    "non-convex G is only solved by brute force on 2x2 one-step problems"
                )
            key = _hkey(t, xp, yp)
            C_t[key] = float(np.sum(L * P))
            g_t[key] = float(np.sum(gm * P))
            V_t[key] = C_t[key] + float(G(g_t[key]))
            layer[key] = cpl
        values[t], aux[t], layers[t] = V_t, g_t, layer
        C_next, g_next = C_t, g_t
    return _finish_plan(T, layers, FULL), ValueTable(FULL, values, aux)


# ---------------------------------------------------------- state-dependent


def _future_walk(layers, T, xp, yp, prob=1.0):
    t = len(xp)
    if t == T:
        yield xp, yp, prob
        return
    M = layers[t][(xp, yp)].matrix
    for i, j in zip(*np.nonzero(M > 0)):
        yield from _future_walk(layers, T, xp + (int(i),), yp + (int(j),), prob * float(M[i, j]))


def solve_equilibrium_state(mu, nu, model: StateDependentCost, history_mode: str | None = None):
    """Equilibrium plan for the state-dependent cost ``E[c(x_t, y_t, x, y) | H_t]``.

    Each self minimizes, exactly, the linear one-step objective

    .. math::
        \\langle V_{t+1} - b_{t+1}(x_{t+1}, y_{t+1}, \\cdot)
        + b_{t+1}(x_t, y_t, \\cdot), \\gamma \\rangle

    with ``b_{t+1}(w, v, H) = E[c(w, v, x, y) | H]`` under the future kernels
    and boundary ``V_T = c(x_T, y_T, x, y)``.

    Parameters
    ----------
    mu, nu : FiniteProcess
    model : StateDependentCost
    history_mode : {"markov", "full"}, optional
        Defaults to markov when the model carries a Markov form.

    Returns
    -------
    plan : KernelPlan
    table : ValueTable with ``aux[t+1][key] = (b_prev, b_next)`` matrices
        over ``(x_{t+1}, y_{t+1})`` for the history ``key`` at time t.
    """
    if history_mode is None:
        history_mode = MARKOV if model.markov is not None else FULL
    if history_mode == MARKOV:
        if model.markov is None:
            raise ValueError("markov mode needs the model's Markov form")
        return _solve_state_markov(mu, nu, model.markov)
    return _solve_state_full(mu, nu, model)


def _solve_state_full(mu, nu, model):
    T = min(mu.horizon, nu.horizon)
    c = model.cost
    values = [None] * (T + 1)
    aux = [None] * (T + 1)
    layers = [None] * T
    V_T = {}
    for xp, yp in product_support_histories(mu, nu, T):
        xl, yl = _labels(mu, xp), _labels(nu, yp)
        V_T[(xp, yp)] = float(c(T, xl[-1], yl[-1], xl, yl))
    values[T] = V_T
    for t in range(T - 1, -1, -1):
        V_t, layer, b_layer = {}, {}, {}
        for xp, yp in _histories(mu, nu, t):
            a, b = _step_marginals(mu, nu, xp, yp)
            w = mu.state_values[xp[-1]] if t > 0 else None
            v = nu.state_values[yp[-1]] if t > 0 else None
            b_prev = np.zeros((a.size, b.size))
            b_next = np.zeros_like(b_prev)
            V_next = np.zeros_like(b_prev)
            for i, j in _entries(a, b):
                cx, cy = xp + (i,), yp + (j,)
                wi, vj = mu.state_values[i], nu.state_values[j]
                for fx, fy, p in _future_walk(layers, T, cx, cy):
                    xl, yl = _labels(mu, fx), _labels(nu, fy)
                    b_prev[i, j] += p * float(c(t, w, v, xl, yl))
                    b_next[i, j] += p * float(c(t + 1, wi, vj, xl, yl))
                V_next[i, j] = values[t + 1][(cx, cy)]
            L = V_next - b_next + b_prev
            key = _hkey(t, xp, yp)
            V_t[key], layer[key] = solve_linear_ot(a, b, L)
            b_layer[key] = (b_prev, b_next)
        values[t], aux[t + 1], layers[t] = V_t, b_layer, layer
    return _finish_plan(T, layers, FULL), ValueTable(FULL, values, aux)


def _solve_state_markov(mu, nu, form: MarkovStateForm):
    T = min(mu.horizon, nu.horizon)
    stage = [np.asarray(s, float) for s in form.stage]
    nx, ny = mu.n_states, nu.n_states
    values = [None] * (T + 1)
    aux = [None] * (T + 1)
    layers = [None] * T
    terminal = np.asarray(form.terminal, float)
    values[T] = {(i, j): float(terminal[i, j]) for i in range(nx) for j in range(ny)}
    F_next = np.zeros((nx, ny))  # expected stage costs after t+1
    V_next = terminal
    for t in range(T - 1, -1, -1):
        tail = stage[t] + F_next
        F_t = np.zeros((nx, ny))
        V_t_arr = np.zeros((nx, ny))
        V_t, layer, b_layer = {}, {}, {}
        keys = [None] if t == 0 else [(i, j) for i in range(nx) for j in range(ny)]
        for key in keys:
            if key is None:
                a, b = mu.initial, nu.initial
                b_prev = tail
            else:
                a, b = mu.kernel[key[0]], nu.kernel[key[1]]
                b_prev = form.prox[t][key[0], key[1]] + tail
            b_next = V_next
            L = V_next - b_next + b_prev
            val, cpl = solve_linear_ot(a, b, L)
            V_t[key] = val
            layer[key] = cpl
            b_layer[key] = (b_prev, b_next)
            if key is not None:
                F_t[key] = float(np.sum(tail * cpl.matrix))
                V_t_arr[key] = val
        values[t], aux[t + 1], layers[t] = V_t, b_layer, layer
        F_next, V_next = F_t, V_t_arr
    return _finish_plan(T, layers, MARKOV), ValueTable(MARKOV, values, aux)


# ------------------------------------------------------------- f-divergence


def _tail_reference(proc, start, tail):
    """Conditional probability of ``tail`` after state ``start``."""
    prob, s = 1.0, start
    for nxt in tail:
        prob *= proc.kernel[s, nxt]
        s = nxt
    return prob


def solve_equilibrium_fdiv(mu, nu, model: FDivCost, tol: float = FW_TOL):
    """Equilibrium plan for ``J_t = E[c | H_t] + D_f(pi(. | H_t) | mu(. | H_t) x nu(. | H_t))``.

    The time-t self minimizes the continuation value minus the future
    conditional divergence, plus the divergence of the whole tail law
    ``gamma x pi*`` against the product reference. The first two terms
    combine into the expected path cost ``E[c | H_{t+1}]``, so each one-step
    problem is a linear term plus a convex f-divergence of ``gamma`` glued
    to the fixed future tails; it is solved by Frank-Wolfe.

    Returns
    -------
    plan : KernelPlan (full mode)
    table : ValueTable with ``aux[t][key] = (E[c | H_t], divergence)``
    """
    T = min(mu.horizon, nu.horizon)
    kind = model.kind
    values = [None] * (T + 1)
    aux = [None] * (T + 1)
    layers = [None] * T
    C_next, tails_next = {}, {}
    V_T, aux_T = {}, {}
    for xp, yp in product_support_histories(mu, nu, T):
        C = float(model.c(_labels(mu, xp), _labels(nu, yp)))
        C_next[(xp, yp)] = C
        tails_next[(xp, yp)] = (np.ones(1), np.ones(1))  # (plan prob, reference prob)
        V_T[(xp, yp)] = C
        aux_T[(xp, yp)] = (C, 0.0)
    values[T], aux[T] = V_T, aux_T

    for t in range(T - 1, -1, -1):
        C_t, tails_t, V_t, aux_t, layer = {}, {}, {}, {}, {}
        for xp, yp in _histories(mu, nu, t):
            a, b = _step_marginals(mu, nu, xp, yp)
            rho = independent_coupling(a, b)
            L = np.zeros_like(rho)
            t_entry, t_rho, t_ratio = [], [], []
            zero_mass = np.zeros(rho.size)
            entries = _entries(a, b)
            for i, j in entries:
                child = (xp + (i,), yp + (j,))
                L[i, j] = C_next[child]
                p_tail, r_tail = tails_next[child]
                e = i * b.size + j
                t_entry.append(np.full(p_tail.size, e))
                t_rho.append(r_tail)
                t_ratio.append(p_tail / r_tail)
                zero_mass[e] = max(0.0, 1.0 - float(r_tail.sum()))
            term = FDivTerm(
                kind,
                rho,
                np.concatenate(t_entry),
                np.concatenate(t_rho),
                np.concatenate(t_ratio),
                zero_mass,
            )
            _, cpl = solve_composite_ot(a, b, L, fdiv=term, tol=tol)
            P = cpl.matrix
            key = _hkey(t, xp, yp)
            C_t[key] = float(np.sum(L * P))
            div = term.value(P)
            V_t[key] = C_t[key] + div
            aux_t[key] = (C_t[key], div)
            layer[key] = cpl
            # tail law of this history: gamma glued to the children's tails
            ps, rs = [], []
            for i, j in entries:
                if P[i, j] <= 0:
                    continue
                p_tail, r_tail = tails_next[(xp + (i,), yp + (j,))]
                ps.append(P[i, j] * p_tail)
                rs.append(rho[i, j] * r_tail)
            tails_t[(xp, yp)] = (np.concatenate(ps), np.concatenate(rs))
        values[t], aux[t], layers[t] = V_t, aux_t, layer
        C_next, tails_next = C_t, tails_t
    return _finish_plan(T, layers, FULL), ValueTable(FULL, values, aux)


# ------------------------------------------------------------- verification


@dataclass(frozen=True)
class Deviation:
    """A one-step deviation that lowers the cost of the time-t self."""

    t: int
    key: object
    current: float
    best: float
    improvement: float
    coupling: np.ndarray = field(repr=False)


class _DeviationProblem:
    """Cost of the time-t self as a function of its own coupling, futures fixed."""

    def __init__(self, a, b, L, g=None, G=None, dG=None, tails=None, kind=None, convex=True):
        self.a, self.b, self.L = a, b, L
        self.g, self.G, self.dG = g, G, dG
        self.tails, self.kind = tails, kind
        self.convex = convex

    def evaluate(self, P) -> float:
        val = float(np.sum(self.L * P))
        if self.G is not None:
            val += float(self.G(float(np.sum(self.g * P))))
        if self.tails is not None:
            rho = np.outer(self.a, self.b)
            pis, rhos = [], []
            for (i, j), (p_tail, r_tail) in self.tails.items():
                pis.append(P[i, j] * p_tail)
                rhos.append(rho[i, j] * r_tail)
            pis, rhos = np.concatenate(pis), np.concatenate(rhos)
            val += divergence_from_weights(self.kind, pis, rhos, max(0.0, 1.0 - rhos.sum()))
        return val

    def solve(self):
        if self.G is None and self.tails is None:
            return solve_linear_ot(self.a, self.b, self.L)[1].matrix
        if self.tails is not None:
            rho = np.outer(self.a, self.b)
            entry, tr, ratio = [], [], []
            zero = np.zeros(rho.size)
            for (i, j), (p_tail, r_tail) in self.tails.items():
                e = i * self.b.size + j
                entry.append(np.full(p_tail.size, e))
                tr.append(r_tail)
                ratio.append(p_tail / r_tail)
                zero[e] = max(0.0, 1.0 - float(r_tail.sum()))
            term = FDivTerm(self.kind, rho, np.concatenate(entry), np.concatenate(tr),
                            np.concatenate(ratio), zero)
            return solve_composite_ot(self.a, self.b, self.L, fdiv=term)[1].matrix
        if self.convex:
            return solve_composite_ot(self.a, self.b, self.L, scalar_g=self.g, G=self.G, dG=self.dG)[1].matrix
        if self.a.size == 2 and self.b.size == 2:
            return _brute_force_2x2(self.a, self.b, self.evaluate)[1]
        return None


def _probe_couplings(a, b, current, n_probes, rng):
    out = []
    ind = independent_coupling(a, b)
    for k in range(n_probes):
        V = solve_linear_ot(a, b, rng.standard_normal((a.size, b.size)))[1].matrix
        lam = rng.random()
        if k % 3 == 0:
            out.append(V)
        elif k % 3 == 1:
            out.append(lam * V + (1 - lam) * current)
        else:
            out.append(lam * V + (1 - lam) * ind)
    return out


def _future_from_plan(plan, xp, yp):
    T = plan.horizon
    if len(xp) == T:
        yield xp, yp, 1.0
        return

    def walk(x, y, prob):
        if len(x) == T:
            yield x, y, prob
            return
        M = plan.step(x, y).matrix
        for i, j in zip(*np.nonzero(M > 0)):
            yield from walk(x + (int(i),), y + (int(j),), prob * float(M[i, j]))

    yield from walk(xp, yp, 1.0)


def _full_problem(plan, mu, nu, model, t, xp, yp):
    a, b = _step_marginals(mu, nu, xp, yp)
    L = np.zeros((a.size, b.size))
    g = np.zeros_like(L)
    tails = {}
    w = mu.state_values[xp[-1]] if t > 0 else None
    v = nu.state_values[yp[-1]] if t > 0 else None
    for i, j in _entries(a, b):
        ps, rs = [], []
        for fx, fy, p in _future_from_plan(plan, xp + (i,), yp + (j,)):
            xl, yl = _labels(mu, fx), _labels(nu, fy)
            if isinstance(model, LinearCost):
                L[i, j] += p * model.tail_cost(t, fx, fy)
            elif isinstance(model, StateDependentCost):
                L[i, j] += p * float(model.cost(t, w, v, xl, yl))
            else:
                L[i, j] += p * float(model.c(xl, yl))
            if isinstance(model, NonlinearCost):
                g[i, j] += p * float(model.h(xl, yl))
            if isinstance(model, FDivCost):
                ps.append(p)
                rs.append(_tail_reference(mu, i, fx[t + 1:]) * _tail_reference(nu, j, fy[t + 1:]))
        if isinstance(model, FDivCost):
            tails[(i, j)] = (np.array(ps), np.array(rs))
    if isinstance(model, NonlinearCost):
        return _DeviationProblem(a, b, L, g=g, G=model.G, dG=model.dG, convex=model.convex)
    if isinstance(model, FDivCost):
        return _DeviationProblem(a, b, L, tails=tails, kind=model.kind)
    return _DeviationProblem(a, b, L)


def _markov_form(model, mu, nu):
    if isinstance(model, StateDependentCost):
        if model.markov is None:
            raise ValueError("markov-mode verification needs the model's Markov form")
        return model.markov
    if isinstance(model, LinearCost):
        T = len(model.stage)
        stage = [model.delta ** (s + 1) * np.asarray(model.stage[s], float) for s in range(T)]
        prox = [None] + [np.zeros(stage[0].shape * 2) for _ in range(T - 1)]
        return MarkovStateForm(prox, stage, stage[-1])
    raise ValueError("markov-mode verification supports linear and state-dependent costs")


def _markov_problems(plan, mu, nu, model):
    """Per-(t, key) linear deviation problems by policy evaluation of the plan."""
    form = _markov_form(model, mu, nu)
    T = plan.horizon
    nx, ny = mu.n_states, nu.n_states
    stage = [np.asarray(s, float) for s in form.stage]
    F = [None] * (T + 1)
    F[T] = np.zeros((nx, ny))
    for s in range(T - 1, 0, -1):
        F[s] = np.zeros((nx, ny))
        nxt = stage[s] + F[s + 1]
        for (i, j), cpl in plan.kernels[s - 1].items():
            F[s][i, j] = float(np.sum(nxt * cpl.matrix))

    def problem(t, key):
        tail = stage[t] + F[t + 1]
        if key is None:
            return _DeviationProblem(mu.initial, nu.initial, tail)
        i, j = key
        return _DeviationProblem(mu.kernel[i], nu.kernel[j], form.prox[t][i, j] + tail)

    return problem


def verify_equilibrium(plan: KernelPlan, mu, nu, model, tol: float = 1e-7, n_probes: int = 50,
                       seed: int = 0):
    """Check the one-step deviation condition at every time and reached history.

    For each ``t = 0..T-1`` and each history with positive probability under
    the plan, the time-t self's cost is rebuilt from scratch as a function of
    its own coupling (future kernels fixed). The current coupling is compared
    against an exact or Frank-Wolfe re-solve and ``n_probes`` random feasible
    couplings.

    Returns
    -------
    list of Deviation
        Empty when no deviation improves the cost by more than ``tol``.
    """
    rng = np.random.default_rng(seed)
    T = plan.horizon
    report = []
    if plan.history_mode == MARKOV:
        problem_at = _markov_problems(plan, mu, nu, model)
    for t in range(T):
        keys = [None] if t == 0 else [k for k, p in history_marginals(plan, t).items() if p > 0]
        for key in keys:
            if plan.history_mode == MARKOV:
                prob = problem_at(t, key)
            else:
                xp, yp = ((), ()) if key is None else key
                prob = _full_problem(plan, mu, nu, model, t, xp, yp)
            current = plan.kernel(t, key).matrix
            j_cur = prob.evaluate(current)
            best, best_P = j_cur, current
            candidates = _probe_couplings(prob.a, prob.b, current, n_probes, rng)
            solved = prob.solve()
            if solved is not None:
                candidates.append(solved)
            for P in candidates:
                val = prob.evaluate(P)
                if val < best:
                    best, best_P = val, P
            if j_cur - best > tol:
                report.append(Deviation(t, key, j_cur, best, j_cur - best, best_P))
    return report


def plan_objective(plan: KernelPlan, mu, nu, model, t: int = 0, key=None) -> float:
    """Cost functional of the time-t self at a history under the plan (direct enumeration)."""
    xp, yp = ((), ()) if key is None else key
    if plan.history_mode == MARKOV and key is not None:
        raise ValueError("pass full prefixes for markov plans")
    paths = list(_future_from_plan(plan, tuple(xp), tuple(yp)))
    w = mu.state_values[xp[-1]] if t > 0 else None
    v = nu.state_values[yp[-1]] if t > 0 else None
    total = 0.0
    hval = 0.0
    ps, rs = [], []
    for fx, fy, p in paths:
        xl, yl = _labels(mu, fx), _labels(nu, fy)
        if isinstance(model, LinearCost):
            total += p * model.tail_cost(t, fx, fy)
        elif isinstance(model, StateDependentCost):
            total += p * float(model.cost(t, w, v, xl, yl))
        else:
            total += p * float(model.c(xl, yl))
        if isinstance(model, NonlinearCost):
            hval += p * float(model.h(xl, yl))
        if isinstance(model, FDivCost):
            ps.append(p)
            if t == 0:
                rs.append(_tail_reference_from_start(mu, fx) * _tail_reference_from_start(nu, fy))
            else:
                rs.append(_tail_reference(mu, fx[t - 1], fx[t:]) * _tail_reference(nu, fy[t - 1], fy[t:]))
    if isinstance(model, NonlinearCost):
        total += float(model.G(hval))
    if isinstance(model, FDivCost):
        rs = np.array(rs)
        total += divergence_from_weights(model.kind, np.array(ps), rs, max(0.0, 1.0 - rs.sum()))
    return total


def _tail_reference_from_start(proc, path):
    return float(proc.initial[path[0]]) * _tail_reference(proc, path[0], path[1:])
