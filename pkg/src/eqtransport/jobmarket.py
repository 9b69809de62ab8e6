"""Assortative-matching and inertia costs for rank processes, plus synthetic data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import LinearCost, MarkovStateForm, StateDependentCost
from .process import FiniteProcess, normalized_ranks
from .transport import PathMeasure


@dataclass(frozen=True)
class InertiaSpec:
    """Inertia weight ``alpha``, proximity scale ``tau`` (0 = indicator) and discount ``delta``."""

    alpha: float
    tau: float = 0.0
    delta: float = 0.9
    n_states: int = 6

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.n_states < 1:
            raise ValueError("n_states must be positive")


def proximity(dist, tau: float):
    """``exp(-dist / tau)``; for ``tau == 0`` the indicator of ``dist == 0`` (0/0 read as 0)."""
    dist = np.asarray(dist, dtype=float)
    if tau == 0:
        out = (dist == 0).astype(float)
    else:
        out = np.exp(-dist / tau)
    return out if out.ndim else float(out)


def pam_cost(delta: float, x_path, y_path) -> float:
    """``sum_{t=1}^T delta^t |x_t - y_t|`` on rank labels."""
    x = np.asarray(x_path, dtype=float)
    y = np.asarray(y_path, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paths must have equal length")
    w = delta ** np.arange(1, x.size + 1)
    return float(np.sum(w * np.abs(x - y)))


def inertia_cost(spec: InertiaSpec, t: int, x_t, y_t, x_path, y_path) -> float:
    """Cost of the time-t self whose current pair is ``(x_t, y_t)``.

    For ``1 <= t < T`` it is ``-alpha * prox(|x_{t+1} - x_t| + |y_{t+1} - y_t|)``
    plus ``sum_{s=t+1}^T delta^s |x_s - y_s|``. At ``t == 0`` there is no
    current pair and only the discounted sum remains. At ``t == T`` the
    boundary value ``delta^T |x_T - y_T|`` is returned.
    """
    x = np.asarray(x_path, dtype=float)
    y = np.asarray(y_path, dtype=float)
    T = x.size
    if y.size != T:
        raise ValueError("paths must have equal length")
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    if t == T:
        return float(spec.delta**T * abs(x[-1] - y[-1]))
    w = spec.delta ** np.arange(t + 1, T + 1)
    tail = float(np.sum(w * np.abs(x[t:] - y[t:])))
    if t == 0:
        return tail
    d = abs(x[t] - x_t) + abs(y[t] - y_t)
    return -spec.alpha * proximity(d, spec.tau) + tail


def pam_stage_costs(n_x: int, n_y: int, T: int, x_values=None, y_values=None):
    """Per-period ``|x - y|`` matrices on rank labels (undiscounted)."""
    xv = normalized_ranks(n_x) if x_values is None else np.asarray(x_values)
    yv = normalized_ranks(n_y) if y_values is None else np.asarray(y_values)
    c = np.abs(xv[:, None] - yv[None, :])
    return [c.copy() for _ in range(T)]


def pam_linear_cost(spec: InertiaSpec, T: int) -> LinearCost:
    n = spec.n_states
    return LinearCost(pam_stage_costs(n, n, T), spec.delta)


def build_state_cost(spec: InertiaSpec, T: int, x_values=None, y_values=None) -> StateDependentCost:
    """Inertia objective as a state-dependent cost, with its Markov form.

    The current pair ``(w, v)`` enters only through the proximity term of
    the next step; the boundary at ``T`` carries no inertia term.
    """
    xv = normalized_ranks(spec.n_states) if x_values is None else np.asarray(x_values, float)
    yv = normalized_ranks(spec.n_states) if y_values is None else np.asarray(y_values, float)
    gap = np.abs(xv[:, None] - yv[None, :])
    stage = [spec.delta ** (s + 1) * gap for s in range(T)]
    dx = np.abs(xv[:, None] - xv[None, :])  # [x_t, x_{t+1}]
    dy = np.abs(yv[:, None] - yv[None, :])
    dist = dx[:, None, :, None] + dy[None, :, None, :]  # [x_t, y_t, x', y']
    prox = -spec.alpha * proximity(dist, spec.tau)
    form = MarkovStateForm([None] + [prox] * (T - 1), stage, stage[-1])

    def cost(t, w, v, x, y):
        return inertia_cost(spec, t, w, v, x, y)

    return StateDependentCost(cost, form)


def synth_perfect_paths(mu: FiniteProcess, N: int, seed) -> PathMeasure:
    """``N`` simulated paths of ``mu`` paired with themselves (weights 1/N, merged)."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    x = mu.simulate(N, rng)
    return PathMeasure(x, x.copy(), np.full(N, 1.0 / N), mu.state_values, mu.state_values)


def synthetic_rank_process(n_states: int, horizon: int, persistence: float = 0.6,
                           spread: float = 1.0, seed=0) -> FiniteProcess:
    """Random rank chain whose transitions concentrate near the current rank.

    Row ``i`` mixes ``persistence`` mass on staying with a discretized
    Laplace-shaped spread over the other ranks, then a Dirichlet jitter.
    """
    rng = np.random.default_rng(seed)
    if n_states == 1:
        return FiniteProcess([1.0], [[1.0]], horizon)
    idx = np.arange(n_states)
    base = np.exp(-np.abs(idx[:, None] - idx[None, :]) / max(spread, 1e-12))
    np.fill_diagonal(base, 0.0)
    base /= base.sum(axis=1, keepdims=True)
    jitter = rng.dirichlet(np.full(n_states, 20.0), size=n_states)
    kernel = persistence * np.eye(n_states) + (1 - persistence) * 0.5 * (base + jitter)
    kernel /= kernel.sum(axis=1, keepdims=True)
    initial = rng.dirichlet(np.full(n_states, 10.0))
    return FiniteProcess(initial, kernel, horizon)
