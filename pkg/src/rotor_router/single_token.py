"""Single-token fast machinery: compressed exploration and O(polyloglog) queries.

The walk of one token decomposes into phases, each ending when the start
vertex completes another full pointer rotation; phase i is an Eulerian cycle
of the already-explored subgraph and a subsequence of phase i+1.  Once phase
``p`` covers all 2m arcs the walk repeats it forever.  The whole exploration
path (length O(mD)) is therefore stored compressed: the final Euler cycle
plus, per arc, the phase of its first traversal.  Phase ``i`` is the
subsequence of the Euler cycle restricted to arcs first traversed by phase
``i``, and it splits into O(|E_{i+1}|-|E_i|+1) fragments that are contiguous
in the Euler cycle, giving O(m) total index size.

Position queries locate the phase by predecessor search over the cumulative
phase lengths, then the fragment inside the phase.  Visit counts follow the
three-case scheme over (first phase of v, its visit timestamps in that phase,
its visit positions on the Euler cycle).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import PortGraph, RotorState

INDEX_FORMAT = "rotor-phase-index"
INDEX_VERSION = 1


class PredecessorSet:
    """Static sorted integer set answering max-element-<=-x queries.

    Two-level layout: the values are cut into equal-count chunks, a directory
    of chunk minima locates the chunk, a search inside the chunk finishes.
    ``predecessor`` returns None when every element exceeds x.
    """

    def __init__(self, values, universe: int | None = None):
        vals = np.unique(np.asarray(list(values), dtype=np.int64))
        self.values = vals
        self.universe = int(universe if universe is not None else (vals[-1] + 1 if len(vals) else 1))
        chunk = max(2, int(np.log2(self.universe + 2)))
        self._chunk = chunk
        self._minima = vals[::chunk] if len(vals) else vals

    def __len__(self) -> int:
        return len(self.values)

    def rank(self, x: int) -> int:
        """Number of elements <= x."""

        vals = self.values
        if not len(vals) or x < vals[0]:
            return 0
        c = int(np.searchsorted(self._minima, x, side="right")) - 1
        lo = c * self._chunk
        hi = min(lo + self._chunk, len(vals))
        return lo + int(np.searchsorted(vals[lo:hi], x, side="right"))

    def predecessor(self, x: int) -> int | None:
        r = self.rank(x)
        return int(self.values[r - 1]) if r else None


@dataclass
class PhaseIndex:
    """Compressed single-token exploration anchored at ``v0``."""

    v0: int
    p: int                      # first full-coverage phase
    length: int                 # |E_1| + ... + |E_p|
    n: int
    num_arcs: int
    expl_arc: np.ndarray        # phase of first traversal, per arc
    expl_node: np.ndarray       # first phase visiting each node (v0 -> 0)
    a_prefix: np.ndarray        # a_prefix[i] = |E_1| + ... + |E_i|
    euler: np.ndarray           # arcs of the final Euler cycle, in order
    ep_pos: np.ndarray          # 1-based position of each arc on the Euler cycle
    deg: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    init_pointer: np.ndarray
    final_pointer: np.ndarray   # rotor state after the full exploration path
    frag_ei: list[np.ndarray]   # per phase: fragment starts, position within E_i
    frag_ep: list[np.ndarray]   # per phase: fragment starts, position on E_p
    x_stamps: list[np.ndarray]  # per node: visit timestamps in its first phase
    y_pos: list[np.ndarray]     # per node: in-arc positions on the Euler cycle

    def __post_init__(self):
        self._phase_ps = PredecessorSet(self.a_prefix[:-1], universe=self.length + 1)
        self._frag_ps = [None, *(PredecessorSet(ei, universe=self.length + 1)
                                 for ei in self.frag_ei[1:])]

    # ------------------------------------------------------------------
    def phase_of(self, t: int) -> int:
        """Phase containing step ``t`` (1 <= t <= length)."""

        return self._phase_ps.rank(t - 1)

    def _arc_in_phase(self, i: int, k: int) -> tuple[int, int]:
        """k-th arc of phase i: (arc id, 1-based Euler-cycle position)."""

        idx = self._frag_ps[i].rank(k) - 1
        ei = int(self.frag_ei[i][idx])
        ep = int(self.frag_ep[i][idx]) + (k - ei)
        return int(self.euler[ep - 1]), ep


def build_phase_index(g: PortGraph, v0: int,
                      state: RotorState | None = None) -> PhaseIndex:
    """Sweep the exploration in O(n + m) and assemble the compressed index.

    Pointers start at port 0 everywhere unless ``state`` supplies them; token
    counts in ``state`` are ignored (single-token semantics).  The sweep
    assigns each arc the phase of its first traversal by walking from queued
    frontier vertices until an explored arc is hit; afterwards the pointers
    are placed in their end-of-exploration position and the final Euler cycle
    is read off by simulating 2m more steps.
    """

    if g.num_arcs == 0:
        raise ValueError("graph has no arcs")
    if not 0 <= v0 < g.n:
        raise ValueError(f"start vertex {v0} out of range")
    n, na = g.n, g.num_arcs
    m = g.m
    offsets = g.offsets.tolist()
    deg = g.deg.tolist()
    head = g.head.tolist()
    init_ptr = (np.zeros(n, dtype=np.int64) if state is None
                else state.pointer.astype(np.int64).copy())

    expl = np.full(na, -1, dtype=np.int64)
    ptr = init_ptr.tolist()
    queue = [v0]
    i = 0
    while queue:
        i += 1
        nxt: list[int] = []
        for v in queue:
            a = offsets[v] + ptr[v]
            while expl[a] < 0:
                expl[a] = i
                ptr[v] = (ptr[v] + 1) % deg[v]
                v = head[a]
                nxt.append(v)
                a = offsets[v] + ptr[v]
        queue = nxt
    p = int(expl.max())
    if (expl < 1).any():
        raise AssertionError("exploration left arcs unvisited on a connected graph")

    expl_node = np.full(n, p + 1, dtype=np.int64)
    np.minimum.at(expl_node, g.head, expl)
    expl_node[v0] = 0

    # visits in the discovery phase of each node = in-arcs first traversed then
    x_count = np.bincount(g.head[expl == expl_node[g.head]], minlength=n)
    final_ptr = (init_ptr + x_count) % g.deg
    final_ptr[v0] = init_ptr[v0]

    # read off the Euler cycle from the end-of-exploration pointer state
    euler = np.empty(2 * m, dtype=np.int64)
    ptr2 = final_ptr.tolist()
    v = v0
    for j in range(2 * m):
        a = offsets[v] + ptr2[v]
        euler[j] = a
        ptr2[v] = (ptr2[v] + 1) % deg[v]
        v = head[a]
    if v != v0 or ptr2 != final_ptr.tolist() or len(np.unique(euler)) != 2 * m:
        raise AssertionError("final-phase walk is not a closed Euler traversal")
    ep_pos = np.empty(na, dtype=np.int64)
    ep_pos[euler] = np.arange(1, 2 * m + 1)

    cnt = np.bincount(expl, minlength=p + 1)
    sizes = np.cumsum(cnt)            # sizes[i] = |E_i| for i >= 1
    a_prefix = np.zeros(p + 1, dtype=np.int64)
    a_prefix[1:] = np.cumsum(sizes[1:p + 1])
    length = int(a_prefix[p])

    eul_expl = expl[euler]
    if np.abs(np.diff(eul_expl)).max(initial=0) > 1:
        raise AssertionError("neighbouring Euler arcs differ by more than one phase")

    # fragment starts: position 1 for every phase, plus each position whose
    # Euler predecessor belongs to the next phase
    frag_pos: list[list[int]] = [[] for _ in range(p + 1)]
    for i in range(1, p + 1):
        frag_pos[i].append(1)
    for idx in np.flatnonzero(eul_expl[:-1] == eul_expl[1:] + 1):
        frag_pos[int(eul_expl[idx + 1])].append(int(idx) + 2)

    arcs_by_phase: list[list[int]] = [[] for _ in range(p + 1)]
    for a in range(na):
        arcs_by_phase[int(expl[a])].append(int(ep_pos[a]))
    nodes_by_phase: list[list[int]] = [[] for _ in range(p + 2)]
    for v in range(n):
        if v != v0:
            nodes_by_phase[int(expl_node[v])].append(v)

    in_eps = [np.sort(ep_pos[g.rev[g.offsets[v]:g.offsets[v + 1]]]) for v in range(n)]

    frag_ei: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
    frag_ep: list[np.ndarray] = [np.empty(0, dtype=np.int64)]
    x_stamps: list[np.ndarray] = [np.empty(0, dtype=np.int64) for _ in range(n)]
    x_stamps[v0] = np.array([0], dtype=np.int64)
    fen = _Fenwick(2 * m)
    for i in range(1, p + 1):
        for pos in arcs_by_phase[i]:
            fen.add(pos)
        eps = np.array(sorted(frag_pos[i]), dtype=np.int64)
        frag_ei.append(np.array([fen.rank(int(e)) for e in eps], dtype=np.int64))
        frag_ep.append(eps)
        base = int(a_prefix[i - 1])
        for v in nodes_by_phase[i]:
            in_arcs = g.rev[g.offsets[v]:g.offsets[v + 1]]
            stamps = sorted(base + fen.rank(int(ep_pos[f]))
                            for f in in_arcs if expl[f] == i)
            x_stamps[v] = np.array(stamps, dtype=np.int64)

    return PhaseIndex(
        v0=v0, p=p, length=length, n=n, num_arcs=na,
        expl_arc=expl, expl_node=expl_node, a_prefix=a_prefix,
        euler=euler, ep_pos=ep_pos,
        deg=g.deg.copy(), tail=g.tail.copy(), head=g.head.copy(),
        init_pointer=init_ptr, final_pointer=final_ptr.astype(np.int64),
        frag_ei=frag_ei, frag_ep=frag_ep,
        x_stamps=x_stamps, y_pos=in_eps,
    )


class _Fenwick:
    """Prefix counts over positions 1..size."""

    def __init__(self, size: int):
        self.size = size
        self.tree = [0] * (size + 1)

    def add(self, pos: int) -> None:
        tree = self.tree
        while pos <= self.size:
            tree[pos] += 1
            pos += pos & (-pos)

    def rank(self, pos: int) -> int:
        tree = self.tree
        total = 0
        while pos > 0:
            total += tree[pos]
            pos -= pos & (-pos)
        return total


# ----------------------------------------------------------------------
# Queries
# ----------------------------------------------------------------------

def position_at(idx: PhaseIndex, t: int) -> int:
    """Arc traversed during step ``t`` >= 1; matches the naive walk exactly."""

    if t < 1:
        raise ValueError("steps are numbered from 1")
    two_m = idx.num_arcs
    if t > idx.length:
        return int(idx.euler[(t - idx.length - 1) % two_m])
    i = idx.phase_of(t)
    k = t - int(idx.a_prefix[i - 1])
    arc, _ = idx._arc_in_phase(i, k)
    return arc


def _locate(idx: PhaseIndex, t: int) -> tuple[int, int]:
    """(phase, 1-based Euler position of the step-t arc) for t >= 1."""

    two_m = idx.num_arcs
    if t > idx.length:
        q, r = divmod(t - idx.length - 1, two_m)
        return idx.p + 1 + q, r + 1
    i = idx.phase_of(t)
    k = t - int(idx.a_prefix[i - 1])
    _, ep = idx._arc_in_phase(i, k)
    return i, ep


def visits_before(idx: PhaseIndex, v: int, t: int) -> int:
    """Number of times ``v`` was visited during steps 0..t (t=0 counts the
    initial placement at the start vertex)."""

    if t < 0:
        raise ValueError("t must be >= 0")
    if not 0 <= v < idx.n:
        raise ValueError(f"vertex {v} out of range")
    if t == 0:
        return 1 if v == idx.v0 else 0
    phase, ep = _locate(idx, t)
    ev = int(idx.expl_node[v])
    if phase < ev:
        return 0
    if phase == ev:
        return int(np.searchsorted(idx.x_stamps[v], t, side="right"))
    return (len(idx.x_stamps[v])
            + (phase - ev - 1) * int(idx.deg[v])
            + int(np.searchsorted(idx.y_pos[v], ep, side="right")))


# ----------------------------------------------------------------------
# Versioned on-disk form (npz container; keys documented in the README)
# ----------------------------------------------------------------------

def save_index(idx: PhaseIndex, path: str) -> None:
    meta = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "v0": idx.v0,
        "p": idx.p,
        "length": idx.length,
        "n": idx.n,
        "num_arcs": idx.num_arcs,
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        "expl_arc": idx.expl_arc,
        "expl_node": idx.expl_node,
        "a_prefix": idx.a_prefix,
        "euler": idx.euler,
        "ep_pos": idx.ep_pos,
        "deg": idx.deg,
        "tail": idx.tail,
        "head": idx.head,
        "init_pointer": idx.init_pointer,
        "final_pointer": idx.final_pointer,
        **_ragged("frag_ei", idx.frag_ei),
        **_ragged("frag_ep", idx.frag_ep),
        **_ragged("x", idx.x_stamps),
        **_ragged("y", idx.y_pos),
    }
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_index(path: str) -> PhaseIndex:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format") != INDEX_FORMAT or meta.get("version") != INDEX_VERSION:
            raise ValueError("not a rotor phase-index file (or unsupported version)")
        return PhaseIndex(
            v0=meta["v0"], p=meta["p"], length=meta["length"], n=meta["n"],
            num_arcs=meta["num_arcs"],
            expl_arc=z["expl_arc"], expl_node=z["expl_node"],
            a_prefix=z["a_prefix"], euler=z["euler"], ep_pos=z["ep_pos"],
            deg=z["deg"], tail=z["tail"], head=z["head"],
            init_pointer=z["init_pointer"], final_pointer=z["final_pointer"],
            frag_ei=_unragged("frag_ei", z), frag_ep=_unragged("frag_ep", z),
            x_stamps=_unragged("x", z), y_pos=_unragged("y", z),
        )


def _ragged(name: str, lists: list[np.ndarray]) -> dict[str, np.ndarray]:
    off = np.zeros(len(lists) + 1, dtype=np.int64)
    for i, arr in enumerate(lists):
        off[i + 1] = off[i] + len(arr)
    flat = (np.concatenate(lists) if any(len(a) for a in lists)
            else np.empty(0, dtype=np.int64))
    return {f"{name}_off": off, f"{name}_val": flat.astype(np.int64)}


def _unragged(name: str, z) -> list[np.ndarray]:
    off = z[f"{name}_off"]
    val = z[f"{name}_val"]
    return [val[off[i]:off[i + 1]].copy() for i in range(len(off) - 1)]
