"""Cost models for the bi-causal transport problems.

Path-level callables receive label paths (``FiniteProcess.state_values``
indexed by the state path) as float arrays of length T.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .divergences import DivergenceKind


@dataclass(frozen=True, eq=False)
class LinearCost:
    """Separable cost ``sum_t delta^t stage[t-1][x_t, y_t]`` on state indices."""

    stage: Sequence[np.ndarray]
    delta: float = 1.0

    def path_cost(self, xi, yi) -> float:
        return float(sum(self.delta ** (t + 1) * self.stage[t][xi[t], yi[t]] for t in range(len(xi))))

    def tail_cost(self, t: int, xi, yi) -> float:
        """Cost of periods ``t+1..T`` (what the time-t self still controls)."""
        return float(sum(self.delta ** (s + 1) * self.stage[s][xi[s], yi[s]] for s in range(t, len(xi))))


@dataclass(frozen=True, eq=False)
class NonlinearCost:
    """``E[c] + G(E[h])`` with path functions ``c``, ``h`` and scalar ``G``.

    ``convex`` declares whether ``G`` is convex; a non-convex ``G`` is only
    solved when every one-step problem is 2x2 (then by dense search).
    """

    c: Callable
    h: Callable
    G: Callable[[float], float]
    dG: Callable[[float], float] | None = None
    convex: bool = True


@dataclass(frozen=True, eq=False)
class MarkovStateForm:
    """Markov structure of a state-dependent cost.

    The time-t self pays ``prox[t][x_t, y_t, x_{t+1}, y_{t+1}]`` plus
    ``sum_{s > t} stage[s-1][x_s, y_s]`` (weights already applied).
    ``prox[0]`` is ignored since there is no period 0 state.
    ``terminal`` is the boundary value ``c(x_T, y_T, .)`` as an (n_x, n_y) array.
    """

    prox: Sequence[np.ndarray | None]
    stage: Sequence[np.ndarray]
    terminal: np.ndarray


@dataclass(frozen=True, eq=False)
class StateDependentCost:
    """Cost ``cost(t, w, v, x, y)`` of the time-t self whose current states are ``(w, v)``.

    ``w`` and ``v`` are labels (``None`` at ``t == 0``); ``x`` and ``y`` are
    full label paths. ``cost(T, x_T, y_T, x, y)`` is the boundary value.
    ``markov`` optionally supplies the same cost in Markov form so that
    solvers can key value functions on ``(x_t, y_t)`` alone.
    """

    cost: Callable
    markov: MarkovStateForm | None = None


@dataclass(frozen=True, eq=False)
class FDivCost:
    """``E[c] + D_f(pi | mu x nu)`` on the conditional path laws."""

    c: Callable
    kind: DivergenceKind = DivergenceKind.KL

    def __post_init__(self):
        object.__setattr__(self, "kind", DivergenceKind(self.kind))


def linear_as_state(cost: LinearCost, x_values, y_values) -> StateDependentCost:
    """View a linear separable cost as a state-dependent one with no proximity term."""
    T = len(cost.stage)
    stage = [cost.delta ** (t + 1) * np.asarray(cost.stage[t], float) for t in range(T)]
    xv = np.asarray(x_values)
    yv = np.asarray(y_values)

    def c(t, w, v, x, y):
        xi = np.searchsorted(xv, x)
        yi = np.searchsorted(yv, y)
        if t == T:
            return float(stage[T - 1][xi[-1], yi[-1]])
        return float(sum(stage[s][xi[s], yi[s]] for s in range(t, T)))

    n_x, n_y = stage[0].shape
    prox = [None] + [np.zeros((n_x, n_y, n_x, n_y)) for _ in range(T - 1)]
    return StateDependentCost(c, MarkovStateForm(prox, stage, stage[T - 1]))
