"""f-divergence generators and divergences against the independent coupling."""

from __future__ import annotations

import enum
import math

import numpy as np

FPRIME_FLOOR = 1e-12


class DivergenceKind(str, enum.Enum):
    KL = "kl"
    SQUARED_HELLINGER = "hellinger"
    LE_CAM = "lecam"
    JENSEN_SHANNON = "js"


# f(0) by continuity, and the recession slope lim f(x)/x used when the
# reference vanishes under positive mass.
_F_AT_ZERO = {
    DivergenceKind.KL: 0.0,
    DivergenceKind.SQUARED_HELLINGER: 1.0,
    DivergenceKind.LE_CAM: 0.5,
    DivergenceKind.JENSEN_SHANNON: math.log(2.0),
}
_RECESSION = {
    DivergenceKind.KL: math.inf,
    DivergenceKind.SQUARED_HELLINGER: 1.0,
    DivergenceKind.LE_CAM: 0.5,
    DivergenceKind.JENSEN_SHANNON: math.log(2.0),
}


def f_eval(kind, x):
    """Generator ``f`` of the divergence, vectorized, extended continuously at 0.

    KL: x ln x; squared Hellinger: (1 - sqrt x)^2; Le Cam: (x - 1)^2 / (2x + 2);
    Jensen-Shannon: x ln(2x / (x + 1)) + ln(2 / (x + 1)).
    """
    kind = DivergenceKind(kind)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("f-divergence generators are defined for x >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is DivergenceKind.KL:
            out = np.where(x_arr > 0, x_arr * np.log(np.where(x_arr > 0, x_arr, 1.0)), 0.0)
        elif kind is DivergenceKind.SQUARED_HELLINGER:
            out = (1.0 - np.sqrt(x_arr)) ** 2
        elif kind is DivergenceKind.LE_CAM:
            out = (x_arr - 1.0) ** 2 / (2.0 * x_arr + 2.0)
        else:
            safe = np.where(x_arr > 0, x_arr, 1.0)
            xlog = np.where(x_arr > 0, x_arr * np.log(2.0 * safe / (safe + 1.0)), 0.0)
            out = xlog + np.log(2.0 / (x_arr + 1.0))
    return out if out.ndim else float(out)


def f_prime(kind, x):
    """Derivative of ``f``, evaluated at ``max(x, 1e-12)``."""
    kind = DivergenceKind(kind)
    x_arr = np.maximum(np.asarray(x, dtype=float), FPRIME_FLOOR)
    if kind is DivergenceKind.KL:
        out = np.log(x_arr) + 1.0
    elif kind is DivergenceKind.SQUARED_HELLINGER:
        out = 1.0 - 1.0 / np.sqrt(x_arr)
    elif kind is DivergenceKind.LE_CAM:
        out = (x_arr - 1.0) * (x_arr + 3.0) / (2.0 * (x_arr + 1.0) ** 2)
    else:
        out = np.log(2.0 * x_arr / (x_arr + 1.0))
    return out if out.ndim else float(out)


def f_second(kind, x):
    """Second derivative of ``f``, evaluated at ``max(x, 1e-12)``."""
    kind = DivergenceKind(kind)
    x_arr = np.maximum(np.asarray(x, dtype=float), FPRIME_FLOOR)
    if kind is DivergenceKind.KL:
        out = 1.0 / x_arr
    elif kind is DivergenceKind.SQUARED_HELLINGER:
        out = 0.5 * x_arr ** -1.5
    elif kind is DivergenceKind.LE_CAM:
        out = 4.0 / (x_arr + 1.0) ** 3
    else:
        out = 1.0 / (x_arr * (x_arr + 1.0))
    return out if out.ndim else float(out)


def f_at_zero(kind) -> float:
    return _F_AT_ZERO[DivergenceKind(kind)]


def divergence_from_weights(kind, pi, rho, unaccounted_rho=0.0) -> float:
    """``sum rho f(pi / rho)`` over paired weights.

    ``unaccounted_rho`` is reference mass not listed in ``rho`` on which
    ``pi`` vanishes; it contributes ``unaccounted_rho * f(0)``. Where
    ``rho == 0`` but ``pi > 0`` the contribution is ``pi * lim f(x)/x``,
    infinite for KL.
    """
    kind = DivergenceKind(kind)
    pi = np.asarray(pi, dtype=float).ravel()
    rho = np.asarray(rho, dtype=float).ravel()
    if np.any(pi < 0) or np.any(rho < 0):
        raise ValueError("weights must be nonnegative")
    pos = rho > 0
    total = float(np.sum(rho[pos] * f_eval(kind, pi[pos] / rho[pos])))
    total += unaccounted_rho * _F_AT_ZERO[kind]
    stray = float(pi[~pos].sum())
    if stray > 0:
        total += stray * _RECESSION[kind]
    return total


def f_divergence(kind, pi, mu, nu) -> float:
    """f-divergence of ``pi`` against the independent coupling of ``mu`` and ``nu``.

    ``pi`` is either a coupling matrix (then ``mu``, ``nu`` are probability
    vectors) or a :class:`~eqtransport.transport.PathMeasure` (then ``mu``,
    ``nu`` are :class:`~eqtransport.process.FiniteProcess` path laws).
    """
    from .process import path_probability

    if hasattr(pi, "weights"):
        if not pi.is_normalized:
            raise ValueError("path measure must be normalized")
        px = {}
        py = {}
        rho = np.empty(len(pi))
        for k in range(len(pi)):
            xp, yp = tuple(pi.x[k]), tuple(pi.y[k])
            if xp not in px:
                px[xp] = path_probability(mu, xp)
            if yp not in py:
                py[yp] = path_probability(nu, yp)
            rho[k] = px[xp] * py[yp]
        rest = max(0.0, 1.0 - float(rho.sum()))
        return divergence_from_weights(kind, pi.weights, rho, rest)
    P = np.asarray(pi, dtype=float)
    ref = np.outer(np.asarray(mu, float), np.asarray(nu, float))
    return divergence_from_weights(kind, P, ref)


def chain_rule_gap(kind, plan, mu, nu) -> float:
    """Gap between the full-path divergence and the sum of expected one-step divergences.

    Zero for KL on any bi-causal plan; generally positive otherwise.
    """
    from .plans import concatenate, history_marginals

    kind = DivergenceKind(kind)
    total = f_divergence(kind, concatenate(plan, mu, nu), mu, nu)
    stepwise = f_divergence(kind, plan.initial.matrix, mu.initial, nu.initial)
    for t in range(1, plan.horizon):
        for key, prob in history_marginals(plan, t).items():
            if prob <= 0:
                continue
            cpl = plan.kernel(t, key)
            stepwise += prob * f_divergence(kind, cpl.matrix, cpl.row_marginal, cpl.col_marginal)
    return abs(total - stepwise)
