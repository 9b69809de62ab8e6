"""Bi-causal plans stored as an initial coupling plus conditional coupling kernels."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .transport import (
    MARGINAL_TOL,
    Coupling,
    PathMeasure,
    independent_coupling,
    solve_linear_ot,
)

MARKOV = "markov"
FULL = "full"
HISTORY_CAP = 1_000_000


@dataclass(frozen=True, eq=False)
class KernelPlan:
    """Bi-causal plan as successive kernels.

    ``kernels[t - 1]`` maps a history key at time ``t`` (t = 1..T-1) to the
    coupling of ``(x_{t+1}, y_{t+1})``. In ``"markov"`` mode the key is the
    state pair ``(x_t, y_t)``; in ``"full"`` mode it is the pair of index
    prefixes ``(x_{1:t}, y_{1:t})`` as tuples.
    """

    initial: Coupling
    kernels: list = field(default_factory=list)
    history_mode: str = MARKOV

    def __post_init__(self):
        if self.history_mode not in (MARKOV, FULL):
            raise ValueError(f"unknown history mode {self.history_mode!r}")

    @property
    def horizon(self) -> int:
        return len(self.kernels) + 1

    @property
    def shape(self):
        return self.initial.matrix.shape

    def key(self, x_prefix, y_prefix):
        """History key of the given index prefixes (length t >= 1)."""
        if self.history_mode == MARKOV:
            return (int(x_prefix[-1]), int(y_prefix[-1]))
        return (tuple(int(s) for s in x_prefix), tuple(int(s) for s in y_prefix))

    def kernel(self, t: int, key) -> Coupling:
        if t == 0:
            return self.initial
        return self.kernels[t - 1][key]

    def step(self, x_prefix, y_prefix) -> Coupling:
        """Coupling used after the given prefixes (empty prefixes -> initial)."""
        t = len(x_prefix)
        if t == 0:
            return self.initial
        return self.kernels[t - 1][self.key(x_prefix, y_prefix)]

    def with_kernel(self, t: int, key, coupling: Coupling) -> "KernelPlan":
        """Copy of the plan with one kernel replaced (``t == 0`` replaces the initial coupling)."""
        if t == 0:
            return KernelPlan(coupling, list(self.kernels), self.history_mode)
        kernels = [dict(k) for k in self.kernels]
        kernels[t - 1][key] = coupling
        return KernelPlan(self.initial, kernels, self.history_mode)


def product_support_histories(mu, nu, t: int, cap: int = HISTORY_CAP):
    """All index prefix pairs of length ``t`` with positive probability under both marginals."""
    xs = [p for p, _ in mu.support_paths(t)]
    ys = [p for p, _ in nu.support_paths(t)]
    if len(xs) * len(ys) > cap:
        raise ValueError(
            f"{len(xs) * len(ys)} histories at t={t} exceed the cap {cap}; use markov mode"
        )
    return [(xp, yp) for xp in xs for yp in ys]


def product_plan(mu, nu, history_mode: str = MARKOV) -> KernelPlan:
    """Plan made of independent couplings at every step."""
    initial = Coupling(independent_coupling(mu.initial, nu.initial), mu.initial, nu.initial)
    kernels = []
    T = min(mu.horizon, nu.horizon)
    for t in range(1, T):
        layer = {}
        if history_mode == MARKOV:
            keys = [(i, j) for i in range(mu.n_states) for j in range(nu.n_states)]
            for i, j in keys:
                a, b = mu.kernel[i], nu.kernel[j]
                layer[(i, j)] = Coupling(independent_coupling(a, b), a, b)
        else:
            for xp, yp in product_support_histories(mu, nu, t):
                a, b = mu.conditional(xp), nu.conditional(yp)
                layer[(xp, yp)] = Coupling(independent_coupling(a, b), a, b)
        kernels.append(layer)
    return KernelPlan(initial, kernels, history_mode)


def _check_dims(plan, mu, nu):
    if plan.shape != (mu.n_states, nu.n_states):
        raise ValueError(
            f"plan couplings are {plan.shape}, marginals have {(mu.n_states, nu.n_states)} states"
        )
    if plan.horizon > min(mu.horizon, nu.horizon):
        raise ValueError("plan horizon exceeds the horizon of the marginals")


def check_bicausal(plan: KernelPlan, mu, nu, tol: float = MARGINAL_TOL):
    """List every ``(t, key, violation)`` whose coupling misses its marginals by more than ``tol``.

    A history reached with positive probability but missing from the plan is
    reported with violation ``inf``. An empty list means the plan is bi-causal.
    """
    _check_dims(plan, mu, nu)
    report = []

    def check(t, key, cpl, a, b):
        m = np.asarray(cpl.matrix)
        if m.shape != (a.size, b.size):
            raise ValueError(f"coupling at t={t}, key={key} has shape {m.shape}")
        err = max(
            float(np.abs(m.sum(axis=1) - a).max()),
            float(np.abs(m.sum(axis=0) - b).max()),
            float(-m.min()),
        )
        if err > tol:
            report.append((t, key, err))

    check(0, None, plan.initial, mu.initial, nu.initial)
    for t in range(1, plan.horizon):
        for key, cpl in plan.kernels[t - 1].items():
            if plan.history_mode == MARKOV:
                a, b = mu.kernel[key[0]], nu.kernel[key[1]]
            else:
                a, b = mu.conditional(key[0]), nu.conditional(key[1])
            check(t, key, cpl, a, b)
        for key, prob in history_marginals(plan, t, strict=False).items():
            if prob > 0 and key not in plan.kernels[t - 1]:
                report.append((t, key, np.inf))
    return report


def history_marginals(plan: KernelPlan, t: int, strict: bool = True) -> dict:
    """Probability of each history key at time ``t`` (1 <= t <= T) under the plan.

    With ``strict=False`` missing kernels are skipped instead of raising.
    """
    if t < 1 or t > plan.horizon:
        raise ValueError(f"t must lie in [1, {plan.horizon}]")
    full = plan.history_mode == FULL
    probs = {}
    P0 = plan.initial.matrix
    for i, j in zip(*np.nonzero(P0 > 0)):
        key = ((int(i),), (int(j),)) if full else (int(i), int(j))
        probs[key] = probs.get(key, 0.0) + float(P0[i, j])
    for s in range(1, t):
        nxt = {}
        layer = plan.kernels[s - 1]
        for key, p in probs.items():
            if key not in layer:
                if strict:
                    raise KeyError(f"plan has no kernel for history {key} at t={s}")
                continue
            M = layer[key].matrix
            for i, j in zip(*np.nonzero(M > 0)):
                k2 = (key[0] + (int(i),), key[1] + (int(j),)) if full else (int(i), int(j))
                nxt[k2] = nxt.get(k2, 0.0) + p * float(M[i, j])
        probs = nxt
    return probs


def _walk(plan: KernelPlan, xp, yp, prob):
    """Depth-first enumeration of positive-probability completions of a prefix."""
    if len(xp) == plan.horizon:
        yield xp, yp, prob
        return
    M = plan.step(xp, yp).matrix
    for i, j in zip(*np.nonzero(M > 0)):
        yield from _walk(plan, xp + (int(i),), yp + (int(j),), prob * float(M[i, j]))


def future_paths(plan: KernelPlan, x_prefix=(), y_prefix=()):
    """Yield ``(x_path, y_path, prob)`` for completions of a prefix under the plan."""
    yield from _walk(plan, tuple(x_prefix), tuple(y_prefix), 1.0)


def concatenate(plan: KernelPlan, mu, nu, cap: int | None = None) -> PathMeasure:
    """Path measure obtained by chaining the plan's kernels.

    Raises ``ValueError`` if the support exceeds ``cap`` atoms; use
    :func:`top_k_paths` for large supports.
    """
    _check_dims(plan, mu, nu)
    T = plan.horizon
    xs, ys, ws = [], [], []
    for xp, yp, w in future_paths(plan):
        xs.append(xp)
        ys.append(yp)
        ws.append(w)
        if cap is not None and len(ws) > cap:
            raise ValueError(f"plan support exceeds {cap} paths; use top_k_paths instead")
    return PathMeasure(
        np.asarray(xs, dtype=np.int64).reshape(-1, T),
        np.asarray(ys, dtype=np.int64).reshape(-1, T),
        np.asarray(ws),
        mu.state_values,
        nu.state_values,
    )


def top_k_paths(plan: KernelPlan, mu, nu, K: int, renormalize: bool = True) -> PathMeasure:
    """The ``K`` most probable path pairs of the plan, without full enumeration.

    Best-first search over the prefix tree: extending a prefix never raises
    its probability, so complete paths leave the heap in decreasing weight.
    Paths of equal weight are ordered lexicographically on ``x_path + y_path``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    _check_dims(plan, mu, nu)
    T = plan.horizon
    heap = [(-1.0, (), ())]
    done = []
    kth = None
    while heap:
        negw, xp, yp = heap[0]
        if kth is not None and -negw < kth:
            break
        heapq.heappop(heap)
        w = -negw
        if len(xp) == T:
            done.append((w, xp, yp))
            if len(done) == K:
                kth = w
            continue
        M = plan.step(xp, yp).matrix
        for i, j in zip(*np.nonzero(M > 0)):
            heapq.heappush(heap, (-(w * float(M[i, j])), xp + (int(i),), yp + (int(j),)))
    done.sort(key=lambda item: (-item[0], item[1] + item[2]))
    done = done[:K]
    w = np.array([d[0] for d in done])
    if renormalize:
        w = w / w.sum()
    return PathMeasure(
        np.array([d[1] for d in done], dtype=np.int64).reshape(-1, T),
        np.array([d[2] for d in done], dtype=np.int64).reshape(-1, T),
        w,
        mu.state_values,
        nu.state_values,
    )


def solve_bicausal_linear(mu, nu, stage_costs, delta: float = 1.0, return_values: bool = False):
    """Time-consistent bi-causal transport with a separable discounted cost.

    Minimizes ``E sum_{t=1}^T delta^t c_t(x_t, y_t)`` over bi-causal plans by
    backward induction on Markov states; every one-step problem is an exact
    linear transport.

    Parameters
    ----------
    mu, nu : FiniteProcess
    stage_costs : sequence of T arrays, shape (n_x, n_y)
        ``stage_costs[t - 1]`` is ``c_t`` on state indices.
    delta : float
        Discount in [0, 1]; period ``t`` carries weight ``delta ** t``.
    return_values : bool
        Also return the list of value arrays ``V_t`` (t = 0..T), where
        ``V_t[x, y]`` is the optimal expected cost of periods ``t+1..T``.

    Returns
    -------
    value : float
    plan : KernelPlan (markov mode)
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    T = min(mu.horizon, nu.horizon)
    costs = [np.asarray(c, dtype=float) for c in stage_costs]
    if len(costs) != T:
        raise ValueError(f"need {T} stage cost matrices, got {len(costs)}")
    for c in costs:
        if c.shape != (mu.n_states, nu.n_states) or not np.all(np.isfinite(c)):
            raise ValueError("stage costs must be finite (n_x, n_y) matrices")
    weights = [delta ** (t + 1) for t in range(T)]

    V_next = np.zeros((mu.n_states, nu.n_states))
    values = [V_next]
    kernels = []
    for t in range(T - 1, 0, -1):
        step_cost = weights[t] * costs[t] + V_next
        V = np.empty_like(V_next)
        layer = {}
        for i in range(mu.n_states):
            for j in range(nu.n_states):
                V[i, j], layer[(i, j)] = solve_linear_ot(mu.kernel[i], nu.kernel[j], step_cost)
        kernels.append(layer)
        values.append(V)
        V_next = V
    value, initial = solve_linear_ot(mu.initial, nu.initial, weights[0] * costs[0] + V_next)
    values.append(np.array(value))
    kernels.reverse()
    values.reverse()
    plan = KernelPlan(initial, kernels, MARKOV)
    if return_values:
        return value, plan, values
    return value, plan


def plan_expected_cost(plan: KernelPlan, path_cost) -> float:
    """``E_pi[path_cost(x, y)]`` by enumerating the plan's support (index paths)."""
    return float(sum(w * path_cost(xp, yp) for xp, yp, w in future_paths(plan)))


def sample_plan(plan: KernelPlan, mu, nu, n_paths: int, seed) -> PathMeasure:
    """Draw ``n_paths`` i.i.d. path pairs from the plan (weights 1/n, merged)."""
    rng = np.random.default_rng(seed)
    T = plan.horizon
    n_y = plan.shape[1]
    xs = np.empty((n_paths, T), dtype=np.int64)
    ys = np.empty((n_paths, T), dtype=np.int64)
    for k in range(n_paths):
        xp, yp = (), ()
        for _ in range(T):
            M = plan.step(xp, yp).matrix.ravel()
            cell = int(rng.choice(M.size, p=M / M.sum()))
            xp, yp = xp + (cell // n_y,), yp + (cell % n_y,)
        xs[k], ys[k] = xp, yp
    return PathMeasure(xs, ys, np.full(n_paths, 1.0 / n_paths), mu.state_values, nu.state_values)
