"""Calibration of the inertia weight against observed matchings."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import solve_equilibrium_state
from .jobmarket import InertiaSpec, build_state_cost, synth_perfect_paths
from .plans import top_k_paths
from .transport import PathMeasure, path_wasserstein

TIE_TOL = 1e-12


def alpha_grid(lo: float = -1.5, hi: float = 1.5, step: float = 0.06) -> np.ndarray:
    """Inclusive grid ``lo, lo + step, ..., hi``, rounded to 10 decimals."""
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


@dataclass(eq=False)
class CalibrationCurve:
    alphas: np.ndarray
    distances: np.ndarray
    normalized_distances: np.ndarray
    seed: object = None
    meta: dict = field(default_factory=dict)
    denoised: np.ndarray | None = None
    optimum: float | None = None
    raw_optimum: float | None = None


@dataclass(eq=False)
class AlphaReport:
    benchmark_alpha: float
    raw_alpha: float
    benchmark_curves: list = field(default_factory=list)
    raw_curves: list = field(default_factory=list)
    adjusted_alpha: float = field(init=False)

    def __post_init__(self):
        self.adjusted_alpha = self.raw_alpha - self.benchmark_alpha

    def as_dict(self) -> dict:
        return {
            "benchmark_alpha": self.benchmark_alpha,
            "raw_alpha": self.raw_alpha,
            "adjusted_alpha": self.adjusted_alpha,
            "benchmark_per_seed": [c.optimum for c in self.benchmark_curves],
            "raw_per_seed": [c.optimum for c in self.raw_curves],
            "benchmark_raw_curve_per_seed": [c.raw_optimum for c in self.benchmark_curves],
            "raw_raw_curve_per_seed": [c.raw_optimum for c in self.raw_curves],
        }


def bootstrap_paths(data: PathMeasure, size: int, seed) -> PathMeasure:
    """Resample ``size`` atoms with replacement in proportion to their weights."""
    if len(data) == 0:
        raise ValueError("cannot bootstrap an empty path measure")
    if size < 1:
        raise ValueError("size must be positive")
    rng = np.random.default_rng(seed)
    p = data.weights / data.weights.sum()
    idx = rng.choice(len(data), size=size, p=p)
    return PathMeasure(data.x[idx], data.y[idx], np.full(size, 1.0 / size), data.x_values, data.y_values)


def equilibrium_paths(mu, nu, alpha: float, tau: float, delta: float, K: int,
                      renormalize: bool = True) -> PathMeasure:
    """Top-``K`` paths of the inertia equilibrium plan at one ``alpha``."""
    T = min(mu.horizon, nu.horizon)
    spec = InertiaSpec(float(alpha), tau, delta, mu.n_states)
    cost = build_state_cost(spec, T, mu.state_values, nu.state_values)
    try:
        plan, _ = solve_equilibrium_state(mu, nu, cost)
    except Exception as exc:
        raise RuntimeError(f"equilibrium solve failed at alpha={alpha}") from exc
    return top_k_paths(plan, mu, nu, K, renormalize=renormalize)


def _paths_job(args):
    return equilibrium_paths(*args)


def model_path_measures(mu, nu, grid, tau: float, delta: float, K: int,
                        renormalize: bool = True, n_workers: int = 1):
    """Equilibrium path measures for every grid point, in grid order.

    Each grid point is solved independently, so the result does not depend
    on ``n_workers``.
    """
    jobs = [(mu, nu, float(a), tau, delta, K, renormalize) for a in grid]
    if n_workers <= 1:
        return [_paths_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_paths_job, jobs))


def sweep_alpha(mu, nu, grid, tau: float, delta: float, pi_r: PathMeasure, K: int,
                renormalize: bool = True, models=None, seed=None, n_workers: int = 1):
    """Wasserstein distance between each grid point's equilibrium plan and ``pi_r``.

    Parameters
    ----------
    mu, nu : FiniteProcess
    grid : array-like
        Strictly increasing inertia weights.
    tau, delta : float
    pi_r : PathMeasure
        Normalized observed (or resampled) path pairs.
    K : int
        Number of most probable model paths kept.
    models : list of PathMeasure, optional
        Precomputed :func:`model_path_measures` for the same inputs.

    Returns
    -------
    CalibrationCurve
        With ``optimum`` unset; see :func:`select_alpha`.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty strictly increasing vector")
    if not pi_r.is_normalized:
        raise ValueError("pi_r must be normalized")
    if models is None:
        models = model_path_measures(mu, nu, grid, tau, delta, K, renormalize, n_workers)
    dist = np.array([path_wasserstein(m, pi_r) for m in models])
    return CalibrationCurve(
        alphas=grid,
        distances=dist,
        normalized_distances=normalize_curve(dist),
        seed=seed,
        meta={"tau": tau, "delta": delta, "K": K, "bootstrap_size": len(pi_r)},
    )


def normalize_curve(dist) -> np.ndarray:
    """Divide by the first grid value; a zero first value maps zeros to 1 and the rest to inf."""
    dist = np.asarray(dist, dtype=float)
    if dist[0] > 0:
        out = dist / dist[0]
    else:
        out = np.where(dist == 0, 1.0, np.inf)
    out[0] = 1.0
    return out


def tv_denoise(signal, lam: float) -> np.ndarray:
    """Exact 1-D total-variation denoising.

    Minimizes ``0.5 * ||u - signal||^2 + lam * sum |u[i+1] - u[i]|`` with
    Condat's direct (non-iterative) algorithm.

    Parameters
    ----------
    signal : array-like, shape (n,)
    lam : float
        Nonnegative regularization weight.

    Returns
    -------
    ndarray, shape (n,)
    """
    y = np.asarray(signal, dtype=float).ravel()
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal must be finite")
    N = y.size
    x = np.empty(N)
    if N == 0:
        return x
    if lam == 0 or N == 1:
        return y.copy()
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam, minlam = 2.0 * lam, -lam
    while True:
        while k == N - 1:
            if umin < 0.0:
                # vmin too high: negative jump
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                x[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = kplus = kminus = k0
            vmax = y[k]
            vmin = vmax - twolam
            umin, umax = lam, minlam
        else:
            k += 1
            if umin >= lam:
                kminus = k
                vmin += (umin - lam) / (k - k0 + 1)
                umin = lam
            if umax <= minlam:
                kplus = k
                vmax += (umax + lam) / (k - k0 + 1)
                umax = minlam


def _closest_to_zero(alphas, values) -> float:
    vmin = values.min()
    hits = np.flatnonzero(values <= vmin + TIE_TOL * max(1.0, abs(vmin)))
    cand = alphas[hits]
    # smallest |alpha|, positive preferred on ties
    order = np.lexsort((-cand, np.abs(cand)))
    return float(cand[order[0]])


def select_alpha(curve: CalibrationCurve, denoise_lambda: float | None = None,
                 denoise: bool = True) -> float:
    """Pick the minimizing grid point of the (denoised) distance curve.

    Among grid points within 1e-12 of the minimum, the one closest to zero
    wins; between ``-a`` and ``+a`` the positive one. ``denoise_lambda``
    defaults to 2% of the curve's range. Sets ``curve.optimum``,
    ``curve.raw_optimum`` and ``curve.denoised``.
    """
    d = np.asarray(curve.distances, dtype=float)
    alphas = np.asarray(curve.alphas, dtype=float)
    if denoise_lambda is None:
        denoise_lambda = 0.02 * float(d.max() - d.min())
    den = tv_denoise(d, denoise_lambda) if denoise else d.copy()
    curve.denoised = den
    curve.raw_optimum = _closest_to_zero(alphas, d)
    curve.optimum = _closest_to_zero(alphas, den)
    return curve.optimum


def run_benchmark_and_raw(mu, nu, grid, pi_r_real: PathMeasure, n_seeds: int = 10,
                          tau: float = 0.0, delta: float = 0.9, K: int = 500,
                          bootstrap_size: int = 500, seed: int = 0,
                          denoise: bool = True, denoise_lambda: float | None = None,
                          renormalize: bool = True, benchmark_nu: str = "estimated",
                          n_workers: int = 1) -> AlphaReport:
    """Benchmark and raw calibration averaged over seeds.

    Per seed the benchmark run compares the model against perfectly matched
    paths simulated from ``mu`` and the raw run against a bootstrap of the
    observed paths. ``benchmark_nu="mu"`` uses ``mu`` for both marginals in
    the benchmark model instead of the estimated ``nu``.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be positive")
    grid = np.asarray(grid, dtype=float)
    models = model_path_measures(mu, nu, grid, tau, delta, K, renormalize, n_workers)
    if benchmark_nu == "mu":
        bench_models = model_path_measures(mu, mu, grid, tau, delta, K, renormalize, n_workers)
    elif benchmark_nu == "estimated":
        bench_models = models
    else:
        raise ValueError("benchmark_nu must be 'estimated' or 'mu'")
    bench, raw = [], []
    for s in range(n_seeds):
        run_seed = seed + s
        synth = synth_perfect_paths(mu, bootstrap_size, (run_seed, 0))
        cb = sweep_alpha(mu, nu, grid, tau, delta, synth, K, renormalize, bench_models, seed=run_seed)
        select_alpha(cb, denoise_lambda, denoise)
        boot = bootstrap_paths(pi_r_real, bootstrap_size, (run_seed, 1))
        cr = sweep_alpha(mu, nu, grid, tau, delta, boot, K, renormalize, models, seed=run_seed)
        select_alpha(cr, denoise_lambda, denoise)
        bench.append(cb)
        raw.append(cr)
    return AlphaReport(
        benchmark_alpha=float(np.mean([c.optimum for c in bench])),
        raw_alpha=float(np.mean([c.optimum for c in raw])),
        benchmark_curves=bench,
        raw_curves=raw,
    )
