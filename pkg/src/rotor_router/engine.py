"""Exact parallel rotor-router stepping and load diagnostics.

One synchronous step empties every vertex: a vertex holding ``c`` tokens sends
them round-robin over its outgoing arcs starting at its pointer, the pointer
advances ``c`` positions, and every token arrives at its head vertex at the
next step.  ``L[t]`` denotes the per-arc load vector of the step taking state
``t`` to state ``t+1``; cumulative loads sum ``L`` over half-open step ranges
``[t1, t2)``.

The quadratic potential of a load vector is the sum of squared per-arc values;
the order-``i`` potential of a state is the potential of its cumulative load
over the next ``i`` steps.  Potentials are exact integers and non-increasing
in time, which the stability detector exploits.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import PortGraph, RotorState


class WindowExceededError(ValueError):
    """A load/cumulative query fell outside the retained trace window."""

    def __init__(self, requested, available: tuple[int, int]):
        self.requested = requested
        self.available = available
        super().__init__(
            f"steps {requested} outside retained window [{available[0]}, {available[1]})"
        )


def default_window(m: int) -> int:
    # exactly what the stability criterion needs: 2m^2 + 3m + 1 load vectors
    return 2 * m * m + 3 * m + 1


class LoadTrace:
    """Ring buffer of the most recent per-arc load vectors.

    Retains up to ``window`` step load vectors ``L[t]``; queries outside the
    retained range raise :class:`WindowExceededError` rather than recomputing
    (runs are deterministic, callers re-run from the start if they need
    deeper history).
    """

    def __init__(self, num_arcs: int, window: int, start: int = 0):
        if window < 0:
            raise ValueError("window must be >= 0")
        self.num_arcs = num_arcs
        self.window = window
        self.start = start
        self._buf = np.zeros((window, num_arcs), dtype=np.int64) if window else None
        self._count = start  # one past the most recent recorded step

    @property
    def end(self) -> int:
        """One past the last retained step index."""

        return self._count

    @property
    def base(self) -> int:
        """Oldest retained step index."""

        return max(self.start, self._count - min(self._count - self.start, self.window))

    def append(self, loads: np.ndarray) -> None:
        if self.window == 0:
            self._count += 1
            return
        pos = self._count % self.window
        self._buf[pos] = loads
        self._count += 1

    def loads(self, t: int) -> np.ndarray:
        """Load vector of step ``t``."""

        if not self.base <= t < self.end:
            raise WindowExceededError(t, (self.base, self.end))
        return self._buf[t % self.window].copy()

    def load_matrix(self, t1: int, t2: int) -> np.ndarray:
        """Stacked loads of steps [t1, t2), oldest first."""

        if t1 > t2:
            raise ValueError("empty-or-forward range required")
        if t1 == t2:
            return np.zeros((0, self.num_arcs), dtype=np.int64)
        if t1 < self.base or t2 > self.end:
            raise WindowExceededError((t1, t2), (self.base, self.end))
        return self._buf[np.arange(t1, t2) % self.window]

    def cumulative(self, t1: int, t2: int, e: int | None = None):
        """C over [t1, t2): token count on arc ``e``, or the full vector."""

        mat = self.load_matrix(t1, t2)
        vec = mat.sum(axis=0) if len(mat) else np.zeros(self.num_arcs, dtype=np.int64)
        if e is None:
            return vec
        return int(vec[e])

    def potential(self, t: int, i: int) -> int:
        """Order-``i`` potential of state ``t``: sum over arcs of C[t, t+i)^2."""

        c = self.cumulative(t, t + i)
        return _sum_of_squares(c)


def _sum_of_squares(vec: np.ndarray) -> int:
    # int64 dot is exact while |C| < 2^31; fall back to Python ints beyond
    m = int(np.abs(vec).max()) if len(vec) else 0
    if m < 2**31 and m * m * max(1, len(vec)) < 2**62:
        return int(vec @ vec)
    return sum(int(x) * int(x) for x in vec)


def cumulative(trace: LoadTrace, t1: int, t2: int, e: int | None = None):
    """Tokens sent along ``e`` (or all arcs) during steps [t1, t2)."""

    return trace.cumulative(t1, t2, e)


def potential(trace: LoadTrace, t: int, i: int) -> int:
    """Order-``i`` potential of state ``t``: sum over arcs of C[t, t+i)^2."""

    return trace.potential(t, i)


@dataclass
class PotentialVector:
    """Values of the order-1..i_max potentials of one state."""

    t: int
    phi: list[int]

    def __getitem__(self, i: int) -> int:
        return self.phi[i - 1]


def potential_vector(trace: LoadTrace, t: int, i_max: int) -> PotentialVector:
    mat = trace.load_matrix(t, t + i_max)
    csum = np.cumsum(mat, axis=0)
    return PotentialVector(t, [_sum_of_squares(csum[i - 1]) for i in range(1, i_max + 1)])


# ----------------------------------------------------------------------
# Stepping
# ----------------------------------------------------------------------

def step_inplace(g: PortGraph, pointer: np.ndarray, tokens: np.ndarray,
                 loads: np.ndarray) -> None:
    """Advance one step, mutating ``pointer``/``tokens``; writes loads into ``loads``."""

    loads[:] = 0
    if g.num_arcs == 0:
        if tokens.any():
            raise ValueError("token stranded at a vertex with no outgoing arcs")
        return
    offsets = g.offsets
    deg = g.deg
    for v in np.flatnonzero(tokens):
        c = int(tokens[v])
        d = int(deg[v])
        o = int(offsets[v])
        q, r = divmod(c, d)
        if q:
            loads[o:o + d] += q
        p = int(pointer[v])
        for j in range(r):
            loads[o + (p + j) % d] += 1
        pointer[v] = (p + c) % d
    # arrivals: in-arcs of u are the reverses of its out-arcs
    tokens[:] = np.add.reduceat(loads[g.rev], g.offsets[:-1])


def step(g: PortGraph, s: RotorState) -> tuple[RotorState, np.ndarray]:
    """One synchronous step; returns the next state and this step's arc loads."""

    s.validate(g)
    out = s.copy()
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    step_inplace(g, out.pointer, out.tokens, loads)
    out.t = s.t + 1
    return out, loads


def run(g: PortGraph, s0: RotorState, steps: int,
        window: int | None = None) -> tuple[RotorState, LoadTrace]:
    """Apply ``steps`` steps from ``s0``; the trace keeps the most recent window."""

    if steps < 0:
        raise ValueError("steps must be >= 0")
    if window is None:
        window = min(steps, default_window(g.m))
    s = s0.copy()
    trace = LoadTrace(g.num_arcs, window, start=s0.t)
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    for _ in range(steps):
        step_inplace(g, s.pointer, s.tokens, loads)
        trace.append(loads)
    s.t = s0.t + steps
    return s, trace


# ----------------------------------------------------------------------
# Balancing sets, discrepancy, alternating-path distance
# ----------------------------------------------------------------------

@dataclass
class BalancingSets:
    """Partition of arcs into load-balancing classes.

    Bipartite graphs split into the two direction classes (side A to side B
    and back); every other graph has a single class.
    """

    sets: list[np.ndarray]

    @property
    def count(self) -> int:
        return len(self.sets)

    def token_sums(self, loads: np.ndarray) -> list[int]:
        return [int(loads[p].sum()) for p in self.sets]


def balancing_sets(g: PortGraph) -> BalancingSets:
    bipartite, color = g.coloring
    arcs = np.arange(g.num_arcs)
    if not bipartite:
        return BalancingSets([arcs])
    tail_color = color[g.tail]
    return BalancingSets([arcs[tail_color == 0], arcs[tail_color == 1]])


def discrepancy_of(loads: np.ndarray, sets: BalancingSets) -> int:
    """Maximum within-set load gap; never compares across sets."""

    worst = 0
    for p in sets.sets:
        if len(p):
            vals = loads[p]
            worst = max(worst, int(vals.max() - vals.min()))
    return worst


def discrepancy(trace: LoadTrace, t: int, sets: BalancingSets) -> int:
    return discrepancy_of(trace.loads(t), sets)


def b_floor(g: PortGraph, sets: BalancingSets, token_sums: list[int]) -> Fraction:
    """Potential floor: sum over sets of |P| * (sum/|P|)^2, as an exact rational.

    Equals k^2/2m for non-bipartite graphs and (k1^2 + k2^2)/m for bipartite
    ones.
    """

    total = Fraction(0)
    for p, s in zip(sets.sets, token_sums):
        if len(p):
            total += Fraction(int(s) * int(s), len(p))
    return total


def arc_distance(g: PortGraph, e: int, e2: int) -> int | None:
    """Length of the shortest alternating path from ``e`` to ``e2``.

    Consecutive arcs alternately share their start vertex and their end
    vertex (either relation may come first).  Returns ``None`` when no such
    path exists, i.e. exactly when the arcs lie in different balancing sets.
    """

    if e == e2:
        return 0
    # state = (arc, relation the NEXT pair must use): 0 share-start, 1 share-end
    seen = np.zeros((g.num_arcs, 2), dtype=bool)
    seen[e] = True
    frontier = [(e, 0), (e, 1)]
    by_tail = [list(g.out_arcs(v)) for v in range(g.n)]
    by_head = [g.in_arcs(v) for v in range(g.n)]
    # each share-group yields all its members the first time it is expanded
    tail_done = np.zeros(g.n, dtype=bool)
    head_done = np.zeros(g.n, dtype=bool)
    d = 0
    while frontier:
        nxt = []
        d += 1
        found = False
        for a, rel in frontier:
            if rel == 0:
                group_v = int(g.tail[a])
                if tail_done[group_v]:
                    continue
                tail_done[group_v] = True
                members = by_tail[group_v]
            else:
                group_v = int(g.head[a])
                if head_done[group_v]:
                    continue
                head_done[group_v] = True
                members = by_head[group_v]
            nrel = 1 - rel
            for b in members:
                if not seen[b, nrel]:
                    seen[b, nrel] = True
                    found = found or b == e2
                    nxt.append((b, nrel))
        if found:
            return d
        frontier = nxt
    return None


# ----------------------------------------------------------------------
# Sparse simulation with an incrementally maintained state hash.  This is the
# workhorse of the hash-oracle stability detector: stepping costs are
# proportional to the number of occupied vertices, not to n.
# ----------------------------------------------------------------------

class ZobristTable:
    """Lazily generated 128-bit keys for (slot, value) pairs."""

    def __init__(self, seed: int = 0x5EED):
        self._rng = random.Random(seed)
        self._keys: dict[tuple, int] = {}

    def key(self, slot) -> int:
        k = self._keys.get(slot)
        if k is None:
            k = self._rng.getrandbits(128)
            self._keys[slot] = k
        return k


class SparseSim:
    """Rotor-router state with O(occupied) stepping and an incremental hash.

    Pointers live in a plain list, tokens in a dict of occupied vertices.
    Equal states always have equal hashes; hash agreement is verified against
    the full state before being trusted.
    """

    __slots__ = ("g", "ptr", "tok", "h", "zt", "t", "_ports_head")

    def __init__(self, g: PortGraph, s0: RotorState, zt: ZobristTable,
                 _ports_head=None):
        self.g = g
        self.zt = zt
        self.ptr = [int(p) for p in s0.pointer]
        self.tok = {int(v): int(c) for v, c in enumerate(s0.tokens) if c}
        self.t = s0.t
        if _ports_head is None:
            _ports_head = [[int(g.head[a]) for a in g.out_arcs(v)] for v in range(g.n)]
        self._ports_head = _ports_head
        h = 0
        key = zt.key
        for v, p in enumerate(self.ptr):
            h ^= key((0, v, p))
        for v, c in self.tok.items():
            h ^= key((1, v, c))
        self.h = h

    def copy(self) -> "SparseSim":
        c = object.__new__(SparseSim)
        c.g = self.g
        c.zt = self.zt
        c.ptr = list(self.ptr)
        c.tok = dict(self.tok)
        c.h = self.h
        c.t = self.t
        c._ports_head = self._ports_head
        return c

    def step(self) -> None:
        ptr = self.ptr
        heads = self._ports_head
        key = self.zt.key
        h = self.h
        arrivals: dict[int, int] = {}
        get = arrivals.get
        for v, c in self.tok.items():
            h ^= key((1, v, c))
            nb = heads[v]
            d = len(nb)
            q, r = divmod(c, d)
            if q:
                for u in nb:
                    arrivals[u] = get(u, 0) + q
            if r:
                p = ptr[v]
                for j in range(r):
                    u = nb[(p + j) % d]
                    arrivals[u] = get(u, 0) + 1
                new_p = (p + r) % d
                h ^= key((0, v, p)) ^ key((0, v, new_p))
                ptr[v] = new_p
        for v, c in arrivals.items():
            h ^= key((1, v, c))
        self.tok = arrivals
        self.h = h
        self.t += 1

    def equal_state(self, other: "SparseSim") -> bool:
        """Exact comparison; used to confirm hash matches."""

        return self.ptr == other.ptr and self.tok == other.tok

    def matches(self, other: "SparseSim") -> bool:
        return self.h == other.h and self.equal_state(other)

    def to_state(self) -> RotorState:
        tokens = np.zeros(self.g.n, dtype=np.int64)
        for v, c in self.tok.items():
            tokens[v] = c
        return RotorState(np.array(self.ptr, dtype=np.int64), tokens, self.t)
