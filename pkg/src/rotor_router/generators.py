"""Extremal instances and standard test graphs with exact initializations.

The balloon family pins the superpolynomial-period lower bound: a cycle of
``x`` vertices with one pendant base vertex, loaded so the clockwise load
pattern (0,1,...,1,2) rotates forever with period ``x``.  Merging balloons
over the first ``r`` primes multiplies the periods.  The lower-bound path and
path-plus-cliques instances realize the slow two-token stabilization.
"""

from __future__ import annotations

from dataclasses import dataclass
import heapq
import math
import random

import numpy as np

from .graph import PortGraph, RotorState, make_state
from . import engine


def sieve_primes(limit: int) -> list[int]:
    """All primes below ``limit`` (Eratosthenes)."""

    if limit <= 2:
        return []
    mask = np.ones(limit, dtype=bool)
    mask[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if mask[p]:
            mask[p * p::p] = False
    return [int(p) for p in np.flatnonzero(mask)]


def first_primes(r: int, start: int = 3) -> list[int]:
    """The first ``r`` primes >= ``start``."""

    limit = 32
    while True:
        primes = [p for p in sieve_primes(limit) if p >= start]
        if len(primes) >= r:
            return primes[:r]
        limit *= 2


# ----------------------------------------------------------------------
# Balloons
# ----------------------------------------------------------------------

def _balloon_ports(x: int, base_id: int, offset: int = 0) -> list[tuple[int, list[int]]]:
    """Port lists for one balloon's cycle vertices (ids offset..offset+x-1).

    Cycle vertex i orders its ports (counter-clockwise neighbour, clockwise
    neighbour), i.e. (v_{i-1}, v_{i+1}); the attachment vertex v_{x-1} orders
    (v_0, v_{x-2}, base).  The stated pointer initialization is then index 0
    everywhere.
    """

    out = []
    for i in range(x - 1):
        prev = offset + (i - 1) % x
        nxt = offset + (i + 1) % x
        out.append((offset + i, [prev, nxt]))
    out.append((offset + x - 1, [offset, offset + x - 2, base_id]))
    return out


def _balloon_tokens(x: int) -> list[int]:
    # (1, 2, 2, ..., 2, 4) over the cycle vertices v_0..v_{x-1}
    return [1] + [2] * (x - 2) + [4]


def gen_balloon(x: int) -> tuple[PortGraph, RotorState]:
    """Balloon on a cycle of ``x`` vertices plus a base vertex (x >= 4).

    Carries 2(x+1) tokens and locks in immediately with period exactly ``x``.
    """

    if x < 4:
        raise ValueError("balloon requires x >= 4")
    base = x
    ports: list[list[int]] = [[] for _ in range(x + 1)]
    for vid, plist in _balloon_ports(x, base):
        ports[vid] = plist
    ports[base] = [x - 1]
    g = PortGraph(ports)
    tokens = _balloon_tokens(x) + [1]
    return g, make_state(g, tokens=tokens)


def gen_multi_balloon(r: int) -> tuple[PortGraph, RotorState]:
    """Balloons over the first ``r`` primes from 3, base vertices merged.

    The merged base (last vertex id) orders its ports by ascending prime and
    holds ``r`` tokens; the system's period is the product of the primes.
    """

    if r < 1:
        raise ValueError("need r >= 1 balloons")
    primes = first_primes(r)
    n = 1 + sum(primes)
    base = n - 1
    ports: list[list[int]] = [[] for _ in range(n)]
    tokens = [0] * n
    offset = 0
    base_ports = []
    for p in primes:
        for vid, plist in _balloon_ports(p, base, offset):
            ports[vid] = plist
        for i, c in enumerate(_balloon_tokens(p)):
            tokens[offset + i] = c
        base_ports.append(offset + p - 1)
        offset += p
    ports[base] = base_ports
    tokens[base] = r
    g = PortGraph(ports)
    return g, make_state(g, tokens=tokens)


# ----------------------------------------------------------------------
# Lower-bound path and path + cliques
# ----------------------------------------------------------------------

def lb_token_vertex(n: int) -> int:
    """0-based id of the doubly-loaded vertex (the paper's 1-based ceil(n/3))."""

    return -(-n // 3) - 1


def gen_lb_path(n: int) -> tuple[PortGraph, RotorState]:
    """Two tokens on an ``n``-vertex path with adversarial pointer split.

    Vertices are 0..n-1 left to right, ports sorted (left, right).  Pointers
    up to the token vertex aim left, the rest aim right; both tokens sit at
    vertex ``lb_token_vertex(n)``.  Stabilization time grows as n^2 log n.
    """

    if n < 9:
        raise ValueError("lower-bound path requires n >= 9")
    g = PortGraph([_path_ports(v, n) for v in range(n)])
    mid = lb_token_vertex(n)
    pointer = np.zeros(n, dtype=np.int64)
    for v in range(1, n - 1):
        pointer[v] = 0 if v <= mid else 1
    tokens = np.zeros(n, dtype=np.int64)
    tokens[mid] = 2
    return g, make_state(g, pointer=pointer, tokens=tokens)


def _path_ports(v: int, n: int) -> list[int]:
    if v == 0:
        return [1]
    if v == n - 1:
        return [n - 2]
    return [v - 1, v + 1]


def clique_edge_count(m_target: int) -> tuple[int, int]:
    """Smallest clique size s with s(s-1)/2 >= m_target; returns (s, M')."""

    s = max(3, math.ceil((1 + math.sqrt(1 + 8 * m_target)) / 2))
    while s * (s - 1) // 2 < m_target:
        s += 1
    return s, s * (s - 1) // 2


@dataclass(frozen=True)
class PathCliqueLayout:
    """Vertex numbering of the path-plus-cliques instance."""

    n_path: int
    clique_size: int
    clique_edges: int  # M'
    left_attach: int = 0

    @property
    def right_attach(self) -> int:
        return self.n_path - 1

    @property
    def left_interior(self) -> range:
        return range(self.n_path, self.n_path + self.clique_size - 1)

    @property
    def right_interior(self) -> range:
        return range(self.n_path + self.clique_size - 1,
                     self.n_path + 2 * (self.clique_size - 1))

    @property
    def n(self) -> int:
        return self.n_path + 2 * (self.clique_size - 1)

    def clique_vertices(self, side: str) -> list[int]:
        if side == "left":
            return [self.left_attach, *self.left_interior]
        return [self.right_attach, *self.right_interior]


def lb_path_cliques_layout(n_path: int, m_target: int) -> PathCliqueLayout:
    s, mprime = clique_edge_count(m_target)
    return PathCliqueLayout(n_path, s, mprime)


def _harvest_clique_pointers(s: int) -> tuple[list[int], int]:
    """Stable single-token pointer arrangement on K_s, token at vertex 0.

    Runs the walk from vertex 0 to lock-in (t_s <= 2mD = 2M' on a clique),
    then advances to the next moment the token sits at vertex 0 and returns
    (pointers, pointer of vertex 0) at that moment.
    """

    ports = [[u for u in range(s) if u != v] for v in range(s)]
    g = PortGraph(ports)
    tokens = np.zeros(s, dtype=np.int64)
    tokens[0] = 1
    state = make_state(g, tokens=tokens)
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    for _ in range(2 * g.m):
        engine.step_inplace(g, state.pointer, state.tokens, loads)
    # walk on until the token is back at vertex 0
    for _ in range(2 * g.m + 1):
        if state.tokens[0]:
            break
        engine.step_inplace(g, state.pointer, state.tokens, loads)
    assert state.tokens[0] == 1
    return [int(p) for p in state.pointer], int(state.pointer[0])


def gen_lb_path_cliques(n_path: int, m_target: int) -> tuple[PortGraph, RotorState]:
    """Lower-bound path with a clique glued onto each endpoint.

    Needs n_path <= m_target <= n_path^2.  Each endpoint is identified with
    one vertex of a clique on M' >= m_target edges whose pointers hold the
    single-token lock-in arrangement anchored at the attachment, so a token
    entering a clique Euler-walks its 2M' arcs and leaves with every clique
    pointer restored.
    """

    if n_path < 9:
        raise ValueError("lower-bound path requires n_path >= 9")
    if not n_path <= m_target <= n_path * n_path:
        raise ValueError("need n_path <= m_target <= n_path^2")
    lay = lb_path_cliques_layout(n_path, m_target)
    s = lay.clique_size
    harvested, ptr0 = _harvest_clique_pointers(s)

    ports: list[list[int]] = [[] for _ in range(lay.n)]
    pointer = np.zeros(lay.n, dtype=np.int64)

    # internal path vertices keep the plain lb-path arrangement
    mid = lb_token_vertex(n_path)
    for v in range(1, n_path - 1):
        ports[v] = [v - 1, v + 1]
        pointer[v] = 0 if v <= mid else 1

    local_ids = {
        "left": {0: lay.left_attach, **{i: lay.left_interior[i - 1] for i in range(1, s)}},
        "right": {0: lay.right_attach, **{i: lay.right_interior[i - 1] for i in range(1, s)}},
    }
    path_nbr = {"left": 1, "right": n_path - 2}
    for side in ("left", "right"):
        ids = local_ids[side]
        # interior vertices keep the harvested order and pointer
        for i in range(1, s):
            ports[ids[i]] = [ids[u] for u in range(s) if u != i]
            pointer[ids[i]] = harvested[i]
        # attachment: harvested clique rotation first, then the path arc, so
        # the s-1 in-clique emissions of a visit are followed by the exit
        local_order = [u for u in range(s) if u != 0]
        rotated = local_order[ptr0:] + local_order[:ptr0]
        ports[ids[0]] = [ids[u] for u in rotated] + [path_nbr[side]]
        pointer[ids[0]] = 0

    g = PortGraph(ports)
    tokens = np.zeros(lay.n, dtype=np.int64)
    tokens[mid] = 2
    return g, make_state(g, pointer=pointer, tokens=tokens)


# ----------------------------------------------------------------------
# Standard corpus
# ----------------------------------------------------------------------

STANDARD_KINDS = ("cycle", "path", "clique", "random_connected")


def gen_standard(kind: str, n: int, seed: int = 0) -> tuple[PortGraph, RotorState]:
    """Deterministic test graphs: cycle | path | clique | random_connected.

    random_connected draws a uniform spanning tree (random Prüfer sequence)
    and adds ``n // 2`` extra random non-tree edges.  Pointers and tokens
    start at zero; use :func:`random_state` to place tokens.
    """

    if kind == "cycle":
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        edges = [(v, (v + 1) % n) for v in range(n)]
    elif kind == "path":
        if n < 2:
            raise ValueError("path needs n >= 2")
        edges = [(v, v + 1) for v in range(n - 1)]
    elif kind == "clique":
        if n < 2:
            raise ValueError("clique needs n >= 2")
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    elif kind == "random_connected":
        if n < 2:
            raise ValueError("random graph needs n >= 2")
        edges = _random_connected_edges(n, random.Random(seed))
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {STANDARD_KINDS}")
    g = _from_sorted_edges(n, edges)
    return g, make_state(g)


def _random_connected_edges(n: int, rng: random.Random) -> list[tuple[int, int]]:
    if n == 2:
        return [(0, 1)]
    prufer = [rng.randrange(n) for _ in range(n - 2)]
    edges = _prufer_to_tree(n, prufer)
    have = {frozenset(e) for e in edges}
    extra = n // 2
    attempts = 0
    while extra > 0 and attempts < 20 * n:
        u, v = rng.randrange(n), rng.randrange(n)
        attempts += 1
        if u != v and frozenset((u, v)) not in have:
            have.add(frozenset((u, v)))
            edges.append((u, v))
            extra -= 1
    return edges


def _prufer_to_tree(n: int, prufer: list[int]) -> list[tuple[int, int]]:
    degree = [1] * n
    for v in prufer:
        degree[v] += 1
    edges = []
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in prufer:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def _from_sorted_edges(n: int, edges: list[tuple[int, int]]) -> PortGraph:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return PortGraph([sorted(p) for p in nbrs])


def random_state(g: PortGraph, k: int, seed: int = 0,
                 random_pointers: bool = True) -> RotorState:
    """k tokens scattered over random vertices, optionally random pointers."""

    rng = random.Random(seed)
    tokens = np.zeros(g.n, dtype=np.int64)
    for _ in range(k):
        tokens[rng.randrange(g.n)] += 1
    if random_pointers:
        pointer = np.array([rng.randrange(int(d)) for d in g.deg], dtype=np.int64)
    else:
        pointer = np.zeros(g.n, dtype=np.int64)
    return make_state(g, pointer=pointer, tokens=tokens)


def random_instance(index: int, n_max: int = 8, k_max: int = 6, n_min: int = 2,
                    require_nonbipartite: bool = False,
                    k_min: int = 0) -> tuple[PortGraph, RotorState]:
    """Deterministic pseudo-random instance family used by tests and plans."""

    seed = 0x5AFE + 7919 * index
    rng = random.Random(seed)
    while True:
        n = rng.randint(max(n_min, 2), n_max)
        g, _ = gen_standard("random_connected", n, seed=rng.randrange(2**30))
        if require_nonbipartite and g.bipartite:
            continue
        k = rng.randint(k_min, k_max)
        return g, random_state(g, k, seed=rng.randrange(2**30))
