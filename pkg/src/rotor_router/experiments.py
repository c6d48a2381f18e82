"""Named experiment plans reproducing the headline measurements.

Each plan expands a deterministic parameter grid into one row per instance
with the shared columns (n, m, diameter, k, t_s, t_p, lcm_bound) plus
plan-specific ones.  Budget-exhausted rows are recorded and the run
continues; the CLI maps them to exit code 2.  Identical invocations produce
byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import generators
from .engine import balancing_sets, discrepancy_of, step_inplace
from .graph import PortGraph, RotorState
from .stability import BudgetExhaustedError, detect_stable_hash, stabilize

SCHEMA = "rotor-report v1"

PLAN_NAMES = (
    "balloon-period-sweep",
    "lb-path-growth",
    "discrepancy-decay",
    "oracle-agreement",
)

BASE_COLUMNS = ["id", "n", "m", "diameter", "k", "t_s", "t_p", "lcm_bound", "error"]

EXTRA_COLUMNS = {
    "balloon-period-sweep": ["kind", "param", "expected_t_p", "ok", "disc_samples"],
    "lb-path-growth": ["n_path", "ts_over_n2", "ratio_to_prev", "disc_samples"],
    "discrepancy-decay": ["threshold_step", "disc_at_threshold", "bound_10d", "ok",
                          "potdrop_ok", "disc_samples"],
    "oracle-agreement": ["t_s_hash", "t_s_potential", "mismatch"],
}


@dataclass
class ExperimentPlan:
    name: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in PLAN_NAMES:
            raise ValueError(f"unknown plan {self.name!r}; expected one of {PLAN_NAMES}")


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    columns: list[str]
    rows: list[dict]

    @property
    def budget_exhausted(self) -> bool:
        return any(r.get("error") == "budget-exhausted" for r in self.rows)


def run_experiment(plan: ExperimentPlan) -> ExperimentResult:
    runner = {
        "balloon-period-sweep": _run_balloon_sweep,
        "lb-path-growth": _run_lb_path_growth,
        "discrepancy-decay": _run_discrepancy_decay,
        "oracle-agreement": _run_oracle_agreement,
    }[plan.name]
    rows = runner(plan)
    for i, row in enumerate(rows):
        row.setdefault("error", "")
        row["id"] = i
    columns = BASE_COLUMNS + EXTRA_COLUMNS[plan.name]
    return ExperimentResult(plan, columns, rows)


def _base_row(g: PortGraph, k: int) -> dict:
    return {"n": g.n, "m": g.m, "diameter": g.diameter, "k": k,
            "t_s": "", "t_p": "", "lcm_bound": ""}


def _as_grid(value) -> tuple:
    if isinstance(value, int):
        return (value,)
    return tuple(value)


def _disc_samples(g: PortGraph, s0: RotorState, horizon: int, points: int = 8) -> str:
    """Discrepancy at geometrically spaced step counts up to ``horizon``."""

    sets = balancing_sets(g)
    horizon = max(1, horizon)
    marks = sorted({max(1, min(horizon, round(horizon ** (i / (points - 1)))))
                    for i in range(points)})
    pointer = s0.pointer.copy()
    tokens = s0.tokens.copy()
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    out = []
    t = 0
    for mark in marks:
        while t < mark:
            step_inplace(g, pointer, tokens, loads)
            t += 1
        out.append(f"{t}:{discrepancy_of(loads, sets)}")
    return "|".join(out)


def _run_balloon_sweep(plan: ExperimentPlan) -> list[dict]:
    xs = _as_grid(plan.params.get("xs", range(4, 10)))
    rs = _as_grid(plan.params.get("rs", range(1, 5)))
    rows = []
    for x in xs:
        g, s0 = generators.gen_balloon(x)
        rows.append(_sweep_row(g, s0, "balloon", x, expected=x))
    for r in rs:
        g, s0 = generators.gen_multi_balloon(r)
        rows.append(_sweep_row(g, s0, "multi-balloon", r,
                               expected=math.prod(generators.first_primes(r))))
    return rows


def _sweep_row(g, s0, kind, param, expected):
    row = _base_row(g, s0.k)
    row.update({"kind": kind, "param": param, "expected_t_p": expected, "ok": ""})
    try:
        res = stabilize(g, s0, method="hash")
        rep = res.report
        row.update({"t_s": rep.t_s, "t_p": rep.t_p, "lcm_bound": rep.lcm_bound,
                    "ok": rep.t_p == expected})
        row["disc_samples"] = _disc_samples(g, s0, rep.t_s + 2 * rep.t_p)
    except BudgetExhaustedError:
        row["error"] = "budget-exhausted"
        row["disc_samples"] = ""
    return row


def _run_lb_path_growth(plan: ExperimentPlan) -> list[dict]:
    ns = _as_grid(plan.params.get("ns", (64, 128, 256)))
    rows = []
    prev_ts = None
    for n in ns:
        g, s0 = generators.gen_lb_path(n)
        row = _base_row(g, s0.k)
        row.update({"n_path": n, "ts_over_n2": "", "ratio_to_prev": "",
                    "disc_samples": ""})
        try:
            rep = detect_stable_hash(g, s0, max_steps=plan.params.get("max_steps"))
            row.update({"t_s": rep.t_s, "t_p": rep.t_p, "lcm_bound": ""})
            row["ts_over_n2"] = f"{rep.t_s / n**2:.6f}"
            if prev_ts is not None:
                row["ratio_to_prev"] = f"{rep.t_s / prev_ts:.4f}"
            prev_ts = rep.t_s
            row["disc_samples"] = _disc_samples(g, s0, min(rep.t_s, 4096))
        except BudgetExhaustedError:
            row["error"] = "budget-exhausted"
        rows.append(row)
    return rows


def potdrop_floor(x: int, diameter: int) -> float:
    """Guaranteed one-step potential drop at arc discrepancy ``x`` > 4D+1."""

    return (x - 4 * diameter - 1) * (x - 1) / (4 * diameter)


def _run_discrepancy_decay(plan: ExperimentPlan) -> list[dict]:
    count = plan.params.get("instances", 20)
    n_max = plan.params.get("n_max", 12)
    k_max = plan.params.get("k_max", 50)
    rows = []
    for i in range(count):
        g, s0 = generators.random_instance(
            plan.seed * 1000 + i, n_max=n_max, k_max=k_max, n_min=4,
            require_nonbipartite=True, k_min=2)
        k = s0.k
        d = g.diameter
        threshold = math.ceil(16 * g.m * d * math.log(k))
        sets = balancing_sets(g)
        pointer = s0.pointer.copy()
        tokens = s0.tokens.copy()
        loads = np.zeros(g.num_arcs, dtype=np.int64)
        potdrop_ok = True
        prev_phi = None
        prev_x = None
        disc_at = None
        for t in range(threshold + 1):
            step_inplace(g, pointer, tokens, loads)
            phi = int(loads @ loads)
            x = discrepancy_of(loads, sets)
            if prev_phi is not None and prev_x > 4 * d + 1:
                # exact form of the drop bound (x-4D-1)(x-1)/(4D)
                if (prev_phi - phi) * 4 * d < (prev_x - 4 * d - 1) * (prev_x - 1):
                    potdrop_ok = False
            prev_phi, prev_x = phi, x
            if t == threshold:
                disc_at = x
        row = _base_row(g, k)
        row.update({
            "t_s": "", "t_p": "", "lcm_bound": "",
            "threshold_step": threshold,
            "disc_at_threshold": disc_at,
            "bound_10d": 10 * d,
            "ok": disc_at <= 10 * d,
            "potdrop_ok": potdrop_ok,
            "disc_samples": _disc_samples(g, s0, threshold),
        })
        rows.append(row)
    return rows


def _run_oracle_agreement(plan: ExperimentPlan) -> list[dict]:
    count = plan.params.get("instances", 50)
    n_max = plan.params.get("n_max", 8)
    k_max = plan.params.get("k_max", 6)
    rows = []
    for i in range(count):
        g, s0 = generators.random_instance(plan.seed * 1000 + i,
                                           n_max=n_max, k_max=k_max)
        row = _base_row(g, s0.k)
        row.update({"t_s_hash": "", "t_s_potential": "", "mismatch": ""})
        try:
            res = stabilize(g, s0, method="both")
            row.update({
                "t_s": res.reports["hash"].t_s,
                "t_p": res.reports["hash"].t_p,
                "lcm_bound": res.reports["hash"].lcm_bound,
                "t_s_hash": res.reports["hash"].t_s,
                "t_s_potential": res.reports["potential"].t_s,
                "mismatch": res.reports["hash"].t_s != res.reports["potential"].t_s,
            })
        except BudgetExhaustedError:
            row["error"] = "budget-exhausted"
        rows.append(row)
    return rows


# ----------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------

def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=result.columns, lineterminator="\n")
    writer.writeheader()
    for row in result.rows:
        writer.writerow({c: row.get(c, "") for c in result.columns})
    return buf.getvalue()


def to_json(result: ExperimentResult) -> str:
    doc = {
        "schema": SCHEMA,
        "plan": result.plan.name,
        "seed": result.plan.seed,
        "params": {k: list(v) if isinstance(v, range) else v
                   for k, v in result.plan.params.items()},
        "columns": result.columns,
        "rows": [{c: row.get(c, "") for c in result.columns} for row in result.rows],
    }
    return json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n"
