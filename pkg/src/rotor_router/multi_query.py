"""Preprocessing for O(n+m) state and visit-count queries at arbitrary times.

Build once: run to the detected stable step T (adaptive potential criterion,
never the worst-case guarantee, which only caps the budget), extract the
subcycle decomposition there, and keep prefix sums along each cycle.  Any
state at time tau >= T is then a cycle rotation away; cumulative visit counts
split into the stored pre-stable prefix plus whole-period multiples plus a
cycle-window remainder.

Pre-stable history is checkpointed every ceil(sqrt(T)) steps (full state +
per-arc running visit counts); queries below T replay from the nearest
checkpoint.  ``dense=True`` stores every step instead, restoring O(n+m)
worst-case queries at the price of O(T) memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .graph import PortGraph, RotorState, parse_graph, serialize_state
from .engine import step_inplace, run
from .stability import (
    SubcycleDecomposition,
    detect_stable_potential,
    extract_decomposition,
    period_bound,
    period_from_decomposition,
    theorem8_budget,
)

INDEX_FORMAT = "rotor-multi-index"
INDEX_VERSION = 1


@dataclass
class MultiIndex:
    g: PortGraph
    s0: RotorState
    t_stable: int
    t_p: int
    lcm_bound: int
    budget_bound: int           # the worst-case stabilization guarantee
    dec: SubcycleDecomposition
    c0_anchor: np.ndarray       # per-arc visit totals C[0, T)
    cp_times: np.ndarray
    cp_pointer: np.ndarray      # (num checkpoints, n)
    cp_tokens: np.ndarray
    cp_visits: np.ndarray       # (num checkpoints, 2m) running C[0, t)
    stride: int
    dense: bool


def build_multi_index(g: PortGraph, s0: RotorState, budget: int | None = None,
                      dense: bool = False) -> MultiIndex:
    """Detect stability adaptively, decompose, and checkpoint the prefix.

    ``budget`` caps the detection; it defaults to the worst-case guarantee.
    Raises the detector's budget-exhausted error if no stable state is
    confirmed in time.
    """

    s0.validate(g)
    k = s0.k
    bound = theorem8_budget(g.m, g.diameter if g.m else 0, k)
    if budget is None:
        budget = bound if k > 0 else None
    rep = detect_stable_potential(g, s0, max_steps=budget, with_period=False)
    t_stable = rep.t_s

    stride = 1 if dense else max(1, math.isqrt(max(t_stable, 1)))
    pointer = s0.pointer.copy()
    tokens = s0.tokens.copy()
    visits = np.zeros(g.num_arcs, dtype=np.int64)
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    cp_t, cp_ptr, cp_tok, cp_vis = [], [], [], []
    for t in range(t_stable + 1):
        if t % stride == 0 or t == t_stable:
            cp_t.append(t)
            cp_ptr.append(pointer.copy())
            cp_tok.append(tokens.copy())
            cp_vis.append(visits.copy())
        if t < t_stable:
            step_inplace(g, pointer, tokens, loads)
            visits += loads

    anchor = RotorState(pointer.copy(), tokens.copy(), s0.t + t_stable)
    need = 2 * g.m * g.m + 1
    _, trace = run(g, anchor, need, window=need)
    dec = extract_decomposition(g, trace, anchor)
    return MultiIndex(
        g=g, s0=s0.copy(), t_stable=t_stable,
        t_p=period_from_decomposition(dec), lcm_bound=period_bound(dec),
        budget_bound=bound, dec=dec, c0_anchor=visits.copy(),
        cp_times=np.array(cp_t, dtype=np.int64),
        cp_pointer=np.array(cp_ptr, dtype=np.int64).reshape(len(cp_t), g.n),
        cp_tokens=np.array(cp_tok, dtype=np.int64).reshape(len(cp_t), g.n),
        cp_visits=np.array(cp_vis, dtype=np.int64).reshape(len(cp_t), g.num_arcs),
        stride=stride, dense=dense,
    )


def _floor_checkpoint(idx: MultiIndex, tau: int) -> int:
    pos = int(np.searchsorted(idx.cp_times, tau, side="right")) - 1
    assert pos >= 0
    return pos


def query_state(idx: MultiIndex, tau: int) -> RotorState:
    """Exact state at time ``tau``; rotation above T, checkpoint replay below."""

    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau >= idx.t_stable:
        return idx.dec.state_at(tau)
    pos = _floor_checkpoint(idx, tau)
    pointer = idx.cp_pointer[pos].copy()
    tokens = idx.cp_tokens[pos].copy()
    loads = np.zeros(idx.g.num_arcs, dtype=np.int64)
    for _ in range(tau - int(idx.cp_times[pos])):
        step_inplace(idx.g, pointer, tokens, loads)
    return RotorState(pointer, tokens, tau)


def query_visits(idx: MultiIndex, e: int, tau: int) -> int:
    """Total tokens sent along arc ``e`` during steps [0, tau)."""

    if not 0 <= e < idx.g.num_arcs:
        raise ValueError(f"arc {e} out of range")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau >= idx.t_stable:
        return int(idx.c0_anchor[e]) + idx.dec.cumulative_from_anchor(e, tau)
    pos = _floor_checkpoint(idx, tau)
    total = int(idx.cp_visits[pos][e])
    cp_t = int(idx.cp_times[pos])
    if tau > cp_t:
        pointer = idx.cp_pointer[pos].copy()
        tokens = idx.cp_tokens[pos].copy()
        loads = np.zeros(idx.g.num_arcs, dtype=np.int64)
        for _ in range(tau - cp_t):
            step_inplace(idx.g, pointer, tokens, loads)
            total += int(loads[e])
    return total


# ----------------------------------------------------------------------
# On-disk form
# ----------------------------------------------------------------------

def save_multi_index(idx: MultiIndex, path: str) -> None:
    meta = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "t_stable": idx.t_stable,
        "t_p": idx.t_p,
        "lcm_bound": idx.lcm_bound,
        "budget_bound": idx.budget_bound,
        "stride": idx.stride,
        "dense": idx.dense,
    }
    cyc_off = np.zeros(len(idx.dec.cycles) + 1, dtype=np.int64)
    for i, c in enumerate(idx.dec.cycles):
        cyc_off[i + 1] = cyc_off[i] + len(c)
    arrays = {
        "meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        "graph": np.frombuffer(serialize_state(idx.g, idx.s0).encode(), dtype=np.uint8),
        "c0_anchor": idx.c0_anchor,
        "cp_times": idx.cp_times,
        "cp_pointer": idx.cp_pointer,
        "cp_tokens": idx.cp_tokens,
        "cp_visits": idx.cp_visits,
        "mapping": idx.dec.mapping,
        "cycle_off": cyc_off,
        "cycle_arcs": (np.concatenate(idx.dec.cycles) if idx.dec.cycles
                       else np.empty(0, dtype=np.int64)),
        "anchor_pointer": idx.dec.anchor_state.pointer,
        "anchor_tokens": idx.dec.anchor_state.tokens,
        "anchor_loads": idx.dec.anchor_loads,
    }
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_multi_index(path: str) -> MultiIndex:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format") != INDEX_FORMAT or meta.get("version") != INDEX_VERSION:
            raise ValueError("not a rotor multi-index file (or unsupported version)")
        g, s0 = parse_graph(bytes(z["graph"]).decode())
        off = z["cycle_off"]
        arcs = z["cycle_arcs"]
        cycles = [arcs[off[i]:off[i + 1]].copy() for i in range(len(off) - 1)]
        anchor = RotorState(z["anchor_pointer"].copy(), z["anchor_tokens"].copy(),
                            int(meta["t_stable"]))
        dec = SubcycleDecomposition(g, z["mapping"].copy(), cycles,
                                    int(meta["t_stable"]), anchor,
                                    z["anchor_loads"].copy())
        return MultiIndex(
            g=g, s0=s0, t_stable=int(meta["t_stable"]), t_p=int(meta["t_p"]),
            lcm_bound=int(meta["lcm_bound"]), budget_bound=int(meta["budget_bound"]),
            dec=dec, c0_anchor=z["c0_anchor"].copy(),
            cp_times=z["cp_times"].copy(), cp_pointer=z["cp_pointer"].copy(),
            cp_tokens=z["cp_tokens"].copy(), cp_visits=z["cp_visits"].copy(),
            stride=int(meta["stride"]), dense=bool(meta["dense"]),
        )
