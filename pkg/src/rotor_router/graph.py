"""Port-labelled graphs and rotor states.

An undirected connected graph is stored in its directed form: every edge
{u, v} contributes the two arcs u->v and v->u.  Arcs are numbered globally
0..2m-1, grouped by tail vertex so that the outgoing arcs of ``v`` occupy the
contiguous id range ``offsets[v]..offsets[v]+deg(v)``.  The cyclic rotor order
of a vertex is exactly the order of that slice.

The companion :class:`RotorState` holds the per-vertex pointer index and token
count, i.e. the full configuration of a walk at one time step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

FORMAT_HEADER = "rotor-graph v1"


class GraphFormatError(ValueError):
    """Raised on malformed graph files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PortGraph:
    """Immutable port-labelled graph.

    Parameters
    ----------
    ports:
        ``ports[v]`` lists the neighbours of ``v`` in cyclic rotor order.
        Parallel edges and self-loops are rejected.
    """

    def __init__(self, ports: list[list[int]]):
        n = len(ports)
        if n == 0:
            raise GraphFormatError("graph has no vertices")
        self.n = n
        self.ports = [list(p) for p in ports]
        for v, nbrs in enumerate(self.ports):
            if any(u == v for u in nbrs):
                raise GraphFormatError(f"self-loop at vertex {v}")
            if len(set(nbrs)) != len(nbrs):
                raise GraphFormatError(f"parallel edges at vertex {v}")
            for u in nbrs:
                if not 0 <= u < n:
                    raise GraphFormatError(f"vertex {v} references unknown neighbour {u}")

        degs = np.array([len(p) for p in self.ports], dtype=np.int64)
        self.deg = degs
        self.offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degs, out=self.offsets[1:])
        self.num_arcs = int(self.offsets[-1])
        if self.num_arcs % 2:
            raise GraphFormatError("arc pairing failed: odd total port count")
        self.m = self.num_arcs // 2

        self.tail = np.empty(self.num_arcs, dtype=np.int64)
        self.head = np.empty(self.num_arcs, dtype=np.int64)
        for v, nbrs in enumerate(self.ports):
            o = int(self.offsets[v])
            for j, u in enumerate(nbrs):
                self.tail[o + j] = v
                self.head[o + j] = u

        # Reverse-arc pairing: edge {u,v} appears once in each port list.
        self.rev = np.full(self.num_arcs, -1, dtype=np.int64)
        index = {}
        for a in range(self.num_arcs):
            index[(int(self.tail[a]), int(self.head[a]))] = a
        for a in range(self.num_arcs):
            b = index.get((int(self.head[a]), int(self.tail[a])))
            if b is None:
                raise GraphFormatError(
                    f"edge {int(self.tail[a])}-{int(self.head[a])} is not listed at both endpoints"
                )
            self.rev[a] = b

        if not self._connected():
            raise GraphFormatError("graph is not connected")

    # ------------------------------------------------------------------
    def arc_id(self, v: int, port: int) -> int:
        return int(self.offsets[v]) + port

    def out_arcs(self, v: int) -> range:
        o = int(self.offsets[v])
        return range(o, o + int(self.deg[v]))

    def in_arcs(self, v: int) -> list[int]:
        return [int(self.rev[a]) for a in self.out_arcs(v)]

    def arc_str(self, a: int) -> str:
        return f"{int(self.tail[a])}->{int(self.head[a])}"

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            v = stack.pop()
            for u in self.ports[v]:
                if not seen[u]:
                    seen[u] = True
                    count += 1
                    stack.append(u)
        return count == self.n

    # ------------------------------------------------------------------
    @cached_property
    def diameter(self) -> int:
        """Exact diameter via all-pairs BFS (cached; O(nm))."""

        ecc = 0
        for s in range(self.n):
            dist = self._bfs(s)
            ecc = max(ecc, int(dist.max()))
        return ecc

    def _bfs(self, s: int) -> np.ndarray:
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for v in frontier:
                dv = dist[v]
                for u in self.ports[v]:
                    if dist[u] < 0:
                        dist[u] = dv + 1
                        nxt.append(u)
            frontier = nxt
        return dist

    @cached_property
    def coloring(self) -> tuple[bool, np.ndarray]:
        """(bipartite flag, 2-coloring).  The coloring is valid only if the flag is set."""

        color = np.full(self.n, -1, dtype=np.int8)
        color[0] = 0
        frontier = [0]
        ok = True
        while frontier:
            nxt = []
            for v in frontier:
                for u in self.ports[v]:
                    if color[u] < 0:
                        color[u] = color[v] ^ 1
                        nxt.append(u)
                    elif color[u] == color[v]:
                        ok = False
            frontier = nxt
        return ok, color

    @property
    def bipartite(self) -> bool:
        return self.coloring[0]

    def __repr__(self) -> str:  # pragma: no cover
        return f"PortGraph(n={self.n}, m={self.m})"


@dataclass
class RotorState:
    """Pointers, token counts, and the step index of one walk configuration."""

    pointer: np.ndarray
    tokens: np.ndarray
    t: int = 0

    def copy(self) -> "RotorState":
        return RotorState(self.pointer.copy(), self.tokens.copy(), self.t)

    @property
    def k(self) -> int:
        return int(self.tokens.sum())

    def validate(self, g: PortGraph) -> None:
        if len(self.pointer) != g.n or len(self.tokens) != g.n:
            raise ValueError("state size does not match graph")
        if (self.tokens < 0).any():
            raise ValueError("negative token count")
        if (self.pointer < 0).any() or (self.pointer >= g.deg).any():
            raise ValueError("pointer index out of range")

    def key(self) -> bytes:
        """Canonical byte encoding (pointers + tokens), independent of t."""

        return self.pointer.tobytes() + b"|" + self.tokens.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RotorState):
            return NotImplemented
        return bool(
            np.array_equal(self.pointer, other.pointer)
            and np.array_equal(self.tokens, other.tokens)
        )


def make_state(g: PortGraph, pointer=None, tokens=None, t: int = 0) -> RotorState:
    ptr = np.zeros(g.n, dtype=np.int64) if pointer is None else np.asarray(pointer, dtype=np.int64).copy()
    tok = np.zeros(g.n, dtype=np.int64) if tokens is None else np.asarray(tokens, dtype=np.int64).copy()
    s = RotorState(ptr, tok, t)
    s.validate(g)
    return s


# ----------------------------------------------------------------------
# On-disk format
#
#   rotor-graph v1
#   nodes <n>
#   node <id> ports <id1> ... <idd> pointer <j> tokens <c>
#
# `pointer` and `tokens` are optional (default 0).  Blank lines and lines
# starting with '#' are ignored.  The JSON mirror carries the same fields.
# ----------------------------------------------------------------------

def parse_graph(text: str, fmt: str = "auto") -> tuple[PortGraph, RotorState]:
    """Parse a graph + initial state from its text or JSON serialization.

    Raises :class:`GraphFormatError` with a line number for malformed input,
    dangling neighbour references, pointer indices out of range, and
    disconnected graphs.
    """

    if fmt == "auto":
        stripped = text.lstrip()
        fmt = "json" if stripped.startswith("{") else "text"
    if fmt == "json":
        return _parse_json(text)
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")

    n = None
    rows: dict[int, tuple[list[int], int, int, int]] = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != FORMAT_HEADER:
                raise GraphFormatError(f"expected header {FORMAT_HEADER!r}", lineno)
            header_seen = True
            continue
        parts = line.split()
        if parts[0] == "nodes":
            if len(parts) != 2:
                raise GraphFormatError("expected 'nodes <n>'", lineno)
            n = _int(parts[1], lineno)
            if n <= 0:
                raise GraphFormatError("vertex count must be positive", lineno)
        elif parts[0] == "node":
            if n is None:
                raise GraphFormatError("'node' line before 'nodes'", lineno)
            vid, row = _parse_node_line(parts, lineno, n)
            if vid in rows:
                raise GraphFormatError(f"duplicate node {vid}", lineno)
            rows[vid] = row
        else:
            raise GraphFormatError(f"unknown directive {parts[0]!r}", lineno)
    if not header_seen:
        raise GraphFormatError("missing header", 1)
    if n is None:
        raise GraphFormatError("missing 'nodes' line")
    return _assemble(n, rows)


def _parse_node_line(parts, lineno, n):
    if len(parts) < 3 or parts[2] != "ports":
        raise GraphFormatError("expected 'node <id> ports ...'", lineno)
    vid = _int(parts[1], lineno)
    if not 0 <= vid < n:
        raise GraphFormatError(f"node id {vid} out of range", lineno)
    ports: list[int] = []
    pointer = 0
    tokens = 0
    i = 3
    while i < len(parts) and parts[i] not in ("pointer", "tokens"):
        u = _int(parts[i], lineno)
        if not 0 <= u < n:
            raise GraphFormatError(f"node {vid} references unknown neighbour {u}", lineno)
        ports.append(u)
        i += 1
    while i < len(parts):
        if parts[i] == "pointer":
            pointer = _int(_field(parts, i + 1, lineno), lineno)
            i += 2
        elif parts[i] == "tokens":
            tokens = _int(_field(parts, i + 1, lineno), lineno)
            i += 2
        else:
            raise GraphFormatError(f"unexpected token {parts[i]!r}", lineno)
    if not ports:
        raise GraphFormatError(f"node {vid} has no ports", lineno)
    if not 0 <= pointer < len(ports):
        raise GraphFormatError(f"pointer {pointer} out of range for degree {len(ports)}", lineno)
    if tokens < 0:
        raise GraphFormatError("negative token count", lineno)
    return vid, (ports, pointer, tokens, lineno)


def _field(parts, i, lineno):
    if i >= len(parts):
        raise GraphFormatError("missing value", lineno)
    return parts[i]


def _int(s: str, lineno: int | None = None) -> int:
    try:
        return int(s)
    except ValueError:
        raise GraphFormatError(f"expected integer, got {s!r}", lineno) from None


def _parse_json(text: str) -> tuple[PortGraph, RotorState]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"invalid JSON: {e}", e.lineno) from None
    if doc.get("format") != "rotor-graph" or doc.get("version") != 1:
        raise GraphFormatError("expected {'format': 'rotor-graph', 'version': 1}")
    n = doc.get("nodes")
    if not isinstance(n, int) or n <= 0:
        raise GraphFormatError("'nodes' must be a positive integer")
    rows: dict[int, tuple[list[int], int, int, int]] = {}
    for entry in doc.get("vertices", []):
        vid = entry["id"]
        if not 0 <= vid < n:
            raise GraphFormatError(f"node id {vid} out of range")
        if vid in rows:
            raise GraphFormatError(f"duplicate node {vid}")
        ports = [int(u) for u in entry["ports"]]
        for u in ports:
            if not 0 <= u < n:
                raise GraphFormatError(f"node {vid} references unknown neighbour {u}")
        pointer = int(entry.get("pointer", 0))
        tokens = int(entry.get("tokens", 0))
        if not ports:
            raise GraphFormatError(f"node {vid} has no ports")
        if not 0 <= pointer < len(ports):
            raise GraphFormatError(f"pointer {pointer} out of range for degree {len(ports)}")
        if tokens < 0:
            raise GraphFormatError("negative token count")
        rows[vid] = (ports, pointer, tokens, -1)
    return _assemble(n, rows)


def _assemble(n, rows) -> tuple[PortGraph, RotorState]:
    ports = []
    pointer = np.zeros(n, dtype=np.int64)
    tokens = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if v not in rows:
            raise GraphFormatError(f"missing 'node {v}' line")
        p, ptr, tok, _ = rows[v]
        ports.append(p)
        pointer[v] = ptr
        tokens[v] = tok
    g = PortGraph(ports)
    return g, RotorState(pointer, tokens)


def serialize_state(g: PortGraph, s: RotorState, fmt: str = "text") -> str:
    """Serialize graph + state; round-trips bit-exactly through :func:`parse_graph`."""

    s.validate(g)
    if fmt == "text":
        lines = [FORMAT_HEADER, f"nodes {g.n}"]
        for v in range(g.n):
            nbrs = " ".join(str(u) for u in g.ports[v])
            lines.append(f"node {v} ports {nbrs} pointer {int(s.pointer[v])} tokens {int(s.tokens[v])}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        doc = {
            "format": "rotor-graph",
            "version": 1,
            "nodes": g.n,
            "vertices": [
                {
                    "id": v,
                    "ports": [int(u) for u in g.ports[v]],
                    "pointer": int(s.pointer[v]),
                    "tokens": int(s.tokens[v]),
                }
                for v in range(g.n)
            ],
        }
        return json.dumps(doc, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def from_edges(n: int, edges: list[tuple[int, int]]) -> PortGraph:
    """Build a graph with the default port order (neighbours ascending by id)."""

    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return PortGraph([sorted(p) for p in nbrs])
