"""Finite-state, time-homogeneous Markov processes used as transport marginals."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def normalized_ranks(n_states: int) -> np.ndarray:
    """Rank labels k / n for k = 0..n-1; 0 is the best rank."""
    return np.arange(n_states) / n_states


@dataclass(frozen=True, eq=False)
class FiniteProcess:
    """Markov chain on ``n_states`` ranks over ``horizon`` periods.

    ``filled_rows`` lists states that had no observed outgoing transition
    during estimation and were given a self-loop.
    """

    initial: np.ndarray
    kernel: np.ndarray
    horizon: int
    state_values: np.ndarray = None
    filled_rows: tuple = field(default=())

    def __post_init__(self):
        initial = _frozen(self.initial)
        kernel = _frozen(self.kernel)
        n = initial.shape[0]
        values = normalized_ranks(n) if self.state_values is None else self.state_values
        values = _frozen(values)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "state_values", values)
        object.__setattr__(self, "filled_rows", tuple(int(i) for i in self.filled_rows))

        if int(self.horizon) < 1:
            raise ValueError("horizon must be a positive integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        if kernel.shape != (n, n):
            raise ValueError(f"kernel must be {n}x{n}, got {kernel.shape}")
        if values.shape != (n,):
            raise ValueError("state_values length must equal n_states")
        if np.any(np.diff(values) <= 0):
            raise ValueError("state_values must be strictly increasing")
        if np.any(initial < 0) or abs(initial.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError("initial must be a probability vector")
        if np.any(kernel < 0) or np.any(np.abs(kernel.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
            raise ValueError("kernel rows must be probability vectors")

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    def marginal(self, t: int) -> np.ndarray:
        """Law of the state at period ``t`` (1-based)."""
        law = self.initial
        for _ in range(t - 1):
            law = law @ self.kernel
        return law

    def conditional(self, prefix: Sequence[int]) -> np.ndarray:
        """Law of the next state given the observed prefix (empty prefix -> initial)."""
        if len(prefix) == 0:
            return self.initial
        return self.kernel[prefix[-1]]

    def simulate(self, n_paths: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n_paths`` index paths, shape (n_paths, horizon)."""
        n = self.n_states
        cum = np.cumsum(self.kernel, axis=1)
        cum[:, -1] = 1.0
        paths = np.empty((n_paths, self.horizon), dtype=np.int64)
        paths[:, 0] = rng.choice(n, size=n_paths, p=self.initial)
        for t in range(1, self.horizon):
            u = rng.random(n_paths)
            rows = cum[paths[:, t - 1]]
            paths[:, t] = (u[:, None] >= rows).sum(axis=1)
        return paths

    def support_paths(self, length: int | None = None):
        """Yield ``(path, probability)`` for every positive-probability prefix of ``length``."""
        length = self.horizon if length is None else length

        def walk(prefix, prob):
            if len(prefix) == length:
                yield tuple(prefix), prob
                return
            law = self.conditional(prefix)
            for s in np.flatnonzero(law > 0):
                yield from walk(prefix + [int(s)], prob * law[s])

        yield from walk([], 1.0)


def path_probability(proc: FiniteProcess, path: Sequence[int]) -> float:
    """``initial[s_1] * prod_t kernel[s_t, s_{t+1}]``."""
    path = [int(s) for s in path]
    if len(path) == 0:
        raise ValueError("empty path")
    if min(path) < 0 or max(path) >= proc.n_states:
        raise ValueError(f"path {path} has states outside [0, {proc.n_states})")
    prob = float(proc.initial[path[0]])
    for s, s_next in zip(path[:-1], path[1:]):
        prob *= proc.kernel[s, s_next]
    return prob


def estimate_process(
    paths: Iterable[Sequence[int]],
    n_states: int,
    horizon: int | None = None,
    state_values=None,
) -> FiniteProcess:
    """Frequency estimate of a time-homogeneous Markov chain.

    Every consecutive pair in every path counts as one transition. Rows with no
    outgoing observation become self-loops. The initial law is the empirical
    distribution of the first state of each path.
    """
    paths = [list(p) for p in paths]
    if not paths:
        raise ValueError("estimate_process needs at least one path")
    counts = np.zeros((n_states, n_states))
    first = np.zeros(n_states)
    for i, p in enumerate(paths):
        if len(p) == 0:
            raise ValueError(f"path {i} is empty")
        arr = np.asarray(p)
        if arr.min() < 0 or arr.max() >= n_states:
            raise ValueError(f"path {i} has a state outside [0, {n_states})")
        first[arr[0]] += 1
        np.add.at(counts, (arr[:-1], arr[1:]), 1)

    out = counts.sum(axis=1)
    filled = np.flatnonzero(out == 0)
    kernel = np.divide(counts, out[:, None], out=np.zeros_like(counts), where=out[:, None] > 0)
    kernel[filled, filled] = 1.0
    if horizon is None:
        horizon = max(len(p) for p in paths)
    return FiniteProcess(
        initial=first / first.sum(),
        kernel=kernel,
        horizon=horizon,
        state_values=state_values,
        filled_rows=tuple(filled),
    )


def all_paths(n_states: int, horizon: int):
    """Every index path of the given length (for exhaustive checks)."""
    return itertools.product(range(n_states), repeat=horizon)
