"""Sector-level estimation and calibration steps shared by the command line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..calibration import alpha_grid, model_path_measures, run_benchmark_and_raw, select_alpha, sweep_alpha
from ..jobmarket import synth_perfect_paths
from ..process import FiniteProcess, estimate_process, normalized_ranks
from ..transport import PathMeasure
from .clustering import ClusterAssignment, cluster_panel
from .config import RunConfig
from .data import Panel, PanelRecord
from .stats import efficiency_coefficient, rank_correlations, select_cluster_count

DEFAULT_STUDY_LENGTH = 5


@dataclass(frozen=True)
class Windows:
    study: tuple
    estimation: tuple


def windows(panel: Panel, cfg: RunConfig) -> Windows:
    periods = panel.periods
    if not periods:
        raise ValueError("panel has no records")
    s_last = cfg.study_last if cfg.study_last is not None else periods[-1]
    s_first = cfg.study_first if cfg.study_first is not None else max(periods[0], s_last - DEFAULT_STUDY_LENGTH + 1)
    e_first = cfg.estimation_first if cfg.estimation_first is not None else periods[0]
    e_last = cfg.estimation_last if cfg.estimation_last is not None else periods[-1]
    if s_first > s_last or e_first > e_last:
        raise ValueError("empty study or estimation window")
    return Windows(tuple(range(s_first, s_last + 1)), tuple(range(e_first, e_last + 1)))


def sector_panels(panel: Panel, cfg: RunConfig) -> dict:
    sectors = panel.sectors
    if cfg.sectors:
        missing = sorted(set(cfg.sectors) - set(sectors))
        if missing:
            raise ValueError(f"sectors not in panel: {', '.join(missing)}")
        sectors = sorted(cfg.sectors)
    return {s: panel.sector(s) for s in sectors}


def choose_cluster_count(panels: dict, cfg: RunConfig, win: Windows):
    """Configured cluster count, or the automatic selection with its diagnostics."""
    if cfg.n_clusters is not None:
        return cfg.n_clusters, None
    study = {s: p.complete_entities(win.study) for s, p in panels.items()}
    return select_cluster_count(study, cfg.candidates, cfg.method, cfg.threshold, cfg.correlation,
                                log_size=cfg.log_size, pooling=cfg.pooling)


def efficiency_rows(panels: dict, cfg: RunConfig, win: Windows):
    rows = []
    for s, p in panels.items():
        sub = p.window(win.study[0], win.study[-1])
        if cfg.pooling == "pooled":
            sign = 1.0 if sub.size_higher_better == sub.wage_higher_better else -1.0
            rho, prho, tau, ptau = rank_correlations(sub.values("size_value"), sign * sub.values("wage_value"))
        else:
            rho, tau = efficiency_coefficient(sub, "per_year")
            prho = ptau = None
        rows.append([s, rho, prho, tau, ptau, len(sub)])
    return rows


def contiguous_runs(assign: ClusterAssignment, periods) -> list:
    """Cluster paths over ``periods``, split wherever an entity has a gap."""
    periods = sorted(periods)
    runs = []
    for e in assign.entities():
        cur, last = [], None
        for p in periods:
            if (p, e) in assign.labels:
                if last is not None and p != last + 1 and cur:
                    runs.append(cur)
                    cur = []
                cur.append(assign.labels[(p, e)])
                last = p
            elif cur:
                runs.append(cur)
                cur, last = [], None
        if cur:
            runs.append(cur)
    return runs


@dataclass
class SectorModel:
    mu: FiniteProcess
    nu: FiniteProcess
    observed: PathMeasure
    n_clusters: int
    size_clusters: ClusterAssignment
    wage_clusters: ClusterAssignment


def build_sector_model(panel: Panel, n: int, cfg: RunConfig, win: Windows) -> SectorModel:
    """Cluster, estimate both rank chains and collect the observed path pairs."""
    periods = sorted(set(win.study) | set(win.estimation))
    sub = panel.filter(lambda r: r.period in periods)
    ax = cluster_panel(sub, "size_value", n, cfg.method, log=cfg.log_size)
    ay = cluster_panel(sub, "wage_value", n, cfg.method)
    T = len(win.study)
    values = normalized_ranks(n)
    runs_x = [r for r in contiguous_runs(ax, win.estimation) if len(r) >= 1]
    runs_y = [r for r in contiguous_runs(ay, win.estimation) if len(r) >= 1]
    if not runs_x:
        raise ValueError("no entity observed in the estimation window")
    mu = estimate_process(runs_x, n, T, values)
    nu = estimate_process(runs_y, n, T, values)
    ents, xs = ax.paths(win.study)
    _, ys = ay.paths(win.study, ents)
    if not ents:
        raise ValueError("no entity observed throughout the study window")
    observed = PathMeasure(xs, ys, np.full(len(ents), 1.0 / len(ents)), values, values)
    return SectorModel(mu, nu, observed, n, ax, ay)


def grid_of(cfg: RunConfig) -> np.ndarray:
    return alpha_grid(cfg.alpha_min, cfg.alpha_max, cfg.alpha_step)


def calibrate_sector(model: SectorModel, cfg: RunConfig, n_workers: int):
    return run_benchmark_and_raw(
        model.mu, model.nu, grid_of(cfg), model.observed, n_seeds=cfg.n_seeds, tau=cfg.tau,
        delta=cfg.delta, K=cfg.top_k, bootstrap_size=cfg.bootstrap_size, seed=cfg.seed,
        denoise=cfg.denoise, denoise_lambda=cfg.denoise_lambda, renormalize=cfg.renormalize,
        benchmark_nu=cfg.benchmark_nu, n_workers=n_workers,
    )


def benchmark_sector(model: SectorModel, cfg: RunConfig, n_workers: int):
    """Benchmark-only runs (perfectly matched synthetic data); returns the curves."""
    grid = grid_of(cfg)
    nu = model.mu if cfg.benchmark_nu == "mu" else model.nu
    models = model_path_measures(model.mu, nu, grid, cfg.tau, cfg.delta, cfg.top_k, cfg.renormalize,
                                 n_workers)
    curves = []
    for s in range(cfg.n_seeds):
        run_seed = cfg.seed + s
        synth = synth_perfect_paths(model.mu, cfg.bootstrap_size, (run_seed, 0))
        c = sweep_alpha(model.mu, nu, grid, cfg.tau, cfg.delta, synth, cfg.top_k, cfg.renormalize,
                        models, seed=run_seed)
        select_alpha(c, cfg.denoise_lambda, cfg.denoise)
        curves.append(c)
    return curves


def synthetic_panel(n_sectors: int = 5, n_entities: int = 40, first: int = 2010, last: int = 2021,
                    seed: int = 0, persistence: float = 0.8) -> Panel:
    """Random panel whose sectors differ in how tightly wages track size.

    Each entity has a latent quality following an AR(1) path; log size is
    quality plus noise, log wage is quality times a sector loading plus
    noise, with loadings spread over ``[0.2, 1.0]``.
    """
    rng = np.random.default_rng(seed)
    periods = range(first, last + 1)
    recs = []
    loads = np.linspace(0.2, 1.0, n_sectors)
    for k in range(n_sectors):
        sector = f"S{k + 1:02d}"
        q = rng.normal(size=n_entities)
        for p in periods:
            q = persistence * q + np.sqrt(1 - persistence**2) * rng.normal(size=n_entities)
            size = np.exp(5.0 + q + 0.3 * rng.normal(size=n_entities))
            wage = np.exp(1.0 + loads[k] * q + (1.0 - loads[k]) * rng.normal(size=n_entities))
            for i in range(n_entities):
                recs.append(PanelRecord(f"{sector}-E{i:03d}", p, round(float(size[i]), 6),
                                        round(float(wage[i]), 6), sector))
    return Panel(tuple(recs))
