"""Command-line entry point ``eqtransport``.

Exit codes: 0 success, 2 validation failure (benchmark out of tolerance,
equilibrium deviation found, no qualifying cluster count), 1 any other error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..equilibrium import solve_equilibrium_state, verify_equilibrium
from ..jobmarket import InertiaSpec, build_state_cost, pam_stage_costs
from ..costs import LinearCost
from ..plans import check_bicausal, solve_bicausal_linear
from .config import RunConfig, load_config, preset_config
from .data import read_academic_panel, read_panel, write_panel
from .report import write_cluster_selection, write_curve, write_efficiency, write_json, write_matrix
from .serialize import load_plan, load_process, save_plan, save_process
from .stats import ClusterSelectionError
from . import workflow

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else preset_config(getattr(args, "preset", None) or "executive")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "n_seeds", None) is not None:
        cfg.n_seeds = args.n_seeds
    if getattr(args, "sector", None):
        cfg.sectors = tuple(args.sector)
    return cfg.validate()


def _panel(args):
    if args.academic:
        return read_academic_panel(args.panel)
    return read_panel(args.panel)


def _workers(args, cfg):
    return args.workers if getattr(args, "workers", None) else cfg.n_workers


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _prepare(args):
    cfg = _config(args)
    panel = _panel(args)
    win = workflow.windows(panel, cfg)
    panels = workflow.sector_panels(panel, cfg)
    return cfg, panel, win, panels


def _write_selection(out, panels, cfg, win, panel):
    # the cluster count is a cross-sector choice, so it always sees every sector
    n, diag = workflow.choose_cluster_count(panel.by_sector(), cfg, win)
    if diag is not None:
        write_cluster_selection(out / "cluster_selection.csv", diag)
    write_efficiency(out / "efficiency.csv", workflow.efficiency_rows(panels, cfg, win))
    return n


def cmd_estimate(args) -> int:
    cfg, panel, win, panels = _prepare(args)
    out = _outdir(args.out)
    n = _write_selection(out, panels, cfg, win, panel)
    for s, p in panels.items():
        m = workflow.build_sector_model(p, n, cfg, win)
        d = _outdir(out / s)
        write_matrix(d / "transitions_x.csv", m.mu.kernel)
        write_matrix(d / "transitions_y.csv", m.nu.kernel)
        save_process(d / "mu.json", m.mu)
        save_process(d / "nu.json", m.nu)
    return EXIT_OK


def cmd_cluster_select(args) -> int:
    cfg, panel, win, panels = _prepare(args)
    if cfg.n_clusters is not None and not args.force_auto:
        print("n_clusters is fixed in the config; pass --auto to run the selection anyway", file=sys.stderr)
    cfg.n_clusters = None
    out = _outdir(args.out)
    write_efficiency(out / "efficiency.csv", workflow.efficiency_rows(panels, cfg, win))
    try:
        n, diag = workflow.choose_cluster_count(panel.by_sector(), cfg, win)
    except ClusterSelectionError as exc:
        write_cluster_selection(out / "cluster_selection.csv", exc.diagnostics)
        print(f"cluster-select: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_cluster_selection(out / "cluster_selection.csv", diag)
    print(n)
    return EXIT_OK


def _report_payload(report, cfg, model, sector):
    d = report.as_dict()
    d["sector"] = sector
    d["n_clusters"] = model.n_clusters
    # ranks never left in the estimation window were filled with self-loops
    d["filled_rows_x"] = [int(i) for i in model.mu.filled_rows]
    d["filled_rows_y"] = [int(i) for i in model.nu.filled_rows]
    d["n_observed_paths"] = int(round(1.0 / float(model.observed.weights.min()))) if len(model.observed) else 0
    cfgd = cfg.as_dict()
    cfgd.pop("n_workers")
    d["config"] = cfgd
    return d


def cmd_calibrate(args) -> int:
    cfg, panel, win, panels = _prepare(args)
    out = _outdir(args.out)
    n = _write_selection(out, panels, cfg, win, panel)
    workers = _workers(args, cfg)
    summary = {}
    for s, p in panels.items():
        m = workflow.build_sector_model(p, n, cfg, win)
        rep = workflow.calibrate_sector(m, cfg, workers)
        d = _outdir(out / s)
        write_matrix(d / "transitions_x.csv", m.mu.kernel)
        write_matrix(d / "transitions_y.csv", m.nu.kernel)
        for c in rep.raw_curves:
            write_curve(d / f"curve_{c.seed}.csv", c)
        for c in rep.benchmark_curves:
            write_curve(d / f"benchmark_curve_{c.seed}.csv", c)
        write_json(d / "alpha_report.json", _report_payload(rep, cfg, m, s))
        summary[s] = {k: rep.as_dict()[k] for k in ("benchmark_alpha", "raw_alpha", "adjusted_alpha")}
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, panel, win, panels = _prepare(args)
    out = _outdir(args.out)
    n = _write_selection(out, panels, cfg, win, panel)
    workers = _workers(args, cfg)
    summary, ok = {}, True
    for s, p in panels.items():
        m = workflow.build_sector_model(p, n, cfg, win)
        curves = workflow.benchmark_sector(m, cfg, workers)
        d = _outdir(out / s)
        for c in curves:
            write_curve(d / f"benchmark_curve_{c.seed}.csv", c)
        bench = float(np.mean([c.optimum for c in curves]))
        passed = abs(bench) <= cfg.tolerance
        ok &= passed
        summary[s] = {"benchmark_alpha": bench, "per_seed": [c.optimum for c in curves],
                      "tolerance": cfg.tolerance, "passed": passed}
    write_json(out / "validation.json", summary)
    for s, r in summary.items():
        print(f"{s}: benchmark alpha {r['benchmark_alpha']:+.4f} {'ok' if r['passed'] else 'FAILED'}")
    return EXIT_OK if ok else EXIT_INVALID


def _cost_model(meta, mu, nu):
    T = min(mu.horizon, nu.horizon)
    kind = meta.get("cost", "inertia")
    if kind == "inertia":
        spec = InertiaSpec(meta["alpha"], meta.get("tau", 0.0), meta.get("delta", 0.9), mu.n_states)
        return build_state_cost(spec, T, mu.state_values, nu.state_values)
    if kind == "pam":
        return LinearCost(pam_stage_costs(mu.n_states, nu.n_states, T, mu.state_values, nu.state_values),
                          meta.get("delta", 0.9))
    raise ValueError(f"unknown cost {kind!r}")


def _cost_meta(args):
    return {"cost": args.cost, "alpha": args.alpha, "tau": args.tau, "delta": args.delta}


def cmd_solve(args) -> int:
    mu, nu = load_process(args.mu), load_process(args.nu)
    meta = _cost_meta(args)
    model = _cost_model(meta, mu, nu)
    if isinstance(model, LinearCost):
        value, plan = solve_bicausal_linear(mu, nu, model.stage, model.delta)
    else:
        plan, table = solve_equilibrium_state(mu, nu, model, history_mode=args.history_mode)
        value = table.value(0)
    meta["value"] = float(value)
    save_plan(args.out, plan, meta)
    print(repr(float(value)))
    return EXIT_OK


def cmd_verify(args) -> int:
    mu, nu = load_process(args.mu), load_process(args.nu)
    plan, meta = load_plan(args.plan)
    if args.cost is not None:
        meta = _cost_meta(args)
    model = _cost_model(meta, mu, nu)
    bad = check_bicausal(plan, mu, nu)
    devs = verify_equilibrium(plan, mu, nu, model, tol=args.tol, n_probes=args.probes, seed=args.seed)
    for t, key, err in bad:
        print(f"infeasible kernel t={t} key={key} error={err:.3e}")
    for d in devs:
        print(f"deviation t={d.t} key={d.key} improvement={d.improvement:.3e}")
    if bad or devs:
        return EXIT_INVALID
    print("equilibrium verified")
    return EXIT_OK


def cmd_synth_panel(args) -> int:
    p = workflow.synthetic_panel(args.sectors, args.entities, args.first, args.last, args.seed)
    write_panel(args.out, p)
    return EXIT_OK


def _data_args(sp, workers=False):
    sp.add_argument("--panel", required=True, help="panel CSV")
    sp.add_argument("--academic", action="store_true", help="academic column layout")
    sp.add_argument("--config", help="INI config file")
    sp.add_argument("--preset", choices=("executive", "academic"), help="preset when no config is given")
    sp.add_argument("--sector", action="append", help="restrict to a sector (repeatable)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-seeds", type=int, dest="n_seeds")
    sp.add_argument("--out", required=True, help="output directory")
    if workers:
        sp.add_argument("--workers", type=int, help="process count (results do not depend on it)")


def _cost_args(sp, required=True):
    sp.add_argument("--mu", required=True, help="size process JSON")
    sp.add_argument("--nu", required=True, help="wage process JSON")
    sp.add_argument("--cost", choices=("inertia", "pam"), default="inertia" if required else None)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--tau", type=float, default=0.0)
    sp.add_argument("--delta", type=float, default=0.9)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqtransport", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="cluster a panel and estimate rank transition matrices")
    _data_args(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("cluster-select", help="pick the cluster count from cross-sector correlations")
    _data_args(sp)
    sp.add_argument("--auto", dest="force_auto", action="store_true")
    sp.set_defaults(func=cmd_cluster_select)

    sp = sub.add_parser("calibrate", help="benchmark, raw and adjusted inertia per sector")
    _data_args(sp, workers=True)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("validate", help="benchmark-only run on perfectly matched synthetic data")
    _data_args(sp, workers=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="one equilibrium solve from stored processes")
    _cost_args(sp)
    sp.add_argument("--history-mode", choices=("markov", "full"), default=None)
    sp.add_argument("--out", required=True, help="plan JSON")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="check a stored plan for profitable one-step deviations")
    sp.add_argument("--plan", required=True)
    _cost_args(sp, required=False)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--probes", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("synth-panel", help="write a synthetic panel CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--sectors", type=int, default=5)
    sp.add_argument("--entities", type=int, default=40)
    sp.add_argument("--first", type=int, default=2010)
    sp.add_argument("--last", type=int, default=2021)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth_panel)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # reported, not raised, so the exit code is reliable
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
