"""JSON round-trips for processes and kernel plans."""

from __future__ import annotations

import numpy as np

from ..plans import FULL, MARKOV, KernelPlan
from ..process import FiniteProcess
from ..transport import Coupling
from .report import read_json, write_json


def process_to_dict(proc: FiniteProcess) -> dict:
    return {
        "initial": proc.initial.tolist(),
        "kernel": proc.kernel.tolist(),
        "horizon": int(proc.horizon),
        "state_values": proc.state_values.tolist(),
        "filled_rows": [int(i) for i in proc.filled_rows],
    }


def process_from_dict(d: dict) -> FiniteProcess:
    try:
        return FiniteProcess(
            initial=np.asarray(d["initial"], dtype=float),
            kernel=np.asarray(d["kernel"], dtype=float),
            horizon=int(d["horizon"]),
            state_values=None if d.get("state_values") is None else np.asarray(d["state_values"], float),
            filled_rows=tuple(d.get("filled_rows", ())),
        )
    except KeyError as exc:
        raise ValueError(f"process description lacks {exc}") from None


def save_process(path, proc: FiniteProcess) -> None:
    write_json(path, process_to_dict(proc))


def load_process(path) -> FiniteProcess:
    return process_from_dict(read_json(path))


def _cpl(c: Coupling) -> dict:
    return {"matrix": c.matrix.tolist(), "row": c.row_marginal.tolist(), "col": c.col_marginal.tolist()}


def _uncpl(d: dict) -> Coupling:
    return Coupling(np.asarray(d["matrix"], float), np.asarray(d["row"], float), np.asarray(d["col"], float))


def plan_to_dict(plan: KernelPlan, meta: dict | None = None) -> dict:
    layers = []
    for layer in plan.kernels:
        entries = []
        for key in sorted(layer):
            x, y = key
            entries.append({"x": list(x) if plan.history_mode == FULL else x,
                            "y": list(y) if plan.history_mode == FULL else y,
                            **_cpl(layer[key])})
        layers.append(entries)
    return {"history_mode": plan.history_mode, "initial": _cpl(plan.initial), "kernels": layers,
            "meta": meta or {}}


def plan_from_dict(d: dict):
    mode = d.get("history_mode", MARKOV)
    kernels = []
    for entries in d["kernels"]:
        layer = {}
        for e in entries:
            key = (tuple(e["x"]), tuple(e["y"])) if mode == FULL else (int(e["x"]), int(e["y"]))
            layer[key] = _uncpl(e)
        kernels.append(layer)
    return KernelPlan(_uncpl(d["initial"]), kernels, mode), d.get("meta", {})


def save_plan(path, plan: KernelPlan, meta: dict | None = None) -> None:
    write_json(path, plan_to_dict(plan, meta))


def load_plan(path):
    return plan_from_dict(read_json(path))
