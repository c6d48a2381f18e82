"""Lock-in detection, subcycle decomposition, and period computation.

A state is stable exactly when it recurs later.  Two detectors are provided:

* the potential criterion: a state is stable iff the order-1..3m potentials
  stay flat for 2m^2 consecutive steps.  A potential drop at step ``t`` for
  some window length i <= 3m happens iff some vertex sees an incoming
  cumulative-load gap of 2 or more over a window anchored at ``t``, so the
  detector tracks the last anchor with such a gap and stops once 2m^2 clean
  anchors are fully verified;
* the hash oracle: exact state recurrence found by Brent's cycle-finding over
  the sparse simulator, O(1) memory, with full-state verification of every
  hash match.

A stable state decomposes into arc-disjoint directed cycles along which the
per-arc loads shift one position per step; the decomposition yields the lcm
period bound, the exact period, and O(n+m) reconstruction of any later state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import PortGraph, RotorState
from .engine import (
    LoadTrace,
    SparseSim,
    ZobristTable,
    _sum_of_squares,
    run,
    step,
    step_inplace,
)

METHOD_POTENTIAL = "potential-criterion"
METHOD_HASH = "hash-oracle"


class BudgetExhaustedError(RuntimeError):
    """No stable state confirmed within the step budget."""

    def __init__(self, steps: int, potential_sums=None):
        self.steps = steps
        self.potential_sums = potential_sums or []
        msg = f"no stable state confirmed within {steps} steps"
        if self.potential_sums:
            msg += f" (last potential sums: {self.potential_sums[-3:]})"
        super().__init__(msg)


class WindowTooShortError(ValueError):
    pass


class ValidationFailedError(RuntimeError):
    """The anchored state failed the load-rotation check, i.e. was not stable."""


class AnchorMismatchError(ValueError):
    pass


@dataclass
class StabilityReport:
    """Detected stabilization step, period, and the lcm period bound."""

    t_s: int
    t_p: int
    method: str
    lcm_bound: int | None = None
    potential_sum_history: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "t_s": self.t_s,
            "t_p": self.t_p,
            "method": self.method,
            "lcm_bound": self.lcm_bound,
            "potential_sum_history": [[t, p] for t, p in self.potential_sum_history],
        }


def theorem8_budget(m: int, diameter: int, k: int) -> int:
    """Worst-case stabilization guarantee 300 m^4 D^2 + ceil(16 m D ln(3km))."""

    if k <= 0 or m == 0:
        return 0
    return 300 * m**4 * diameter**2 + math.ceil(16 * m * diameter * math.log(3 * k * m))


# ----------------------------------------------------------------------
# Hash oracle (Brent's algorithm over the sparse simulator)
# ----------------------------------------------------------------------

def _same(a: SparseSim, b: SparseSim) -> bool:
    # hash first; verify the full state on a match so collisions cannot lie
    return a.h == b.h and a.equal_state(b)


def detect_stable_hash(g: PortGraph, s0: RotorState,
                       max_steps: int | None = None) -> StabilityReport:
    """Exact t_s and t_p from the first state recurrence.

    Runs Brent's cycle detection over the deterministic step map; memory is
    O(n) regardless of how long stabilization takes.  Raises
    :class:`BudgetExhaustedError` if the recurrence horizon t_s + t_p exceeds
    ``max_steps``.
    """

    s0.validate(g)
    zt = ZobristTable()
    base = SparseSim(g, s0, zt)
    cap = None if max_steps is None else 2 * max_steps + 4

    power = lam = 1
    tortoise = base.copy()
    hare = base.copy()
    hare.step()
    hare_steps = 1
    while not _same(tortoise, hare):
        if power == lam:
            tortoise = hare.copy()
            power *= 2
            lam = 0
        hare.step()
        hare_steps += 1
        lam += 1
        if cap is not None and hare_steps > cap:
            raise BudgetExhaustedError(max_steps)

    tortoise = base.copy()
    hare = base.copy()
    for _ in range(lam):
        hare.step()
    mu = 0
    while not _same(tortoise, hare):
        tortoise.step()
        hare.step()
        mu += 1
    if max_steps is not None and mu + lam > max_steps:
        raise BudgetExhaustedError(max_steps)
    return StabilityReport(t_s=mu, t_p=lam, method=METHOD_HASH)


# ----------------------------------------------------------------------
# Potential criterion
# ----------------------------------------------------------------------

def detect_stable_potential(g: PortGraph, s0: RotorState,
                            max_steps: int | None = None,
                            history_samples: int = 48,
                            with_period: bool = True) -> StabilityReport:
    """Smallest T whose order-1..3m potentials stay flat for 2m^2 steps.

    Equivalent to the hash oracle's t_s by the stability characterization.
    The period is recovered from the subcycle decomposition of the detected
    state unless ``with_period`` is false (then ``t_p`` is set to 0 as a
    placeholder and ``lcm_bound`` left empty).
    """

    s0.validate(g)
    m = g.m
    if m == 0:
        return StabilityReport(0, 1, METHOD_POTENTIAL, 1)
    span = 3 * m
    confirm = 2 * m * m
    if max_steps is not None and max_steps < confirm + span:
        raise ValueError(f"max_steps must be at least 2m^2+3m = {confirm + span}")

    in_cols = g.rev
    offsets = np.asarray(g.offsets[:-1], dtype=np.intp)
    ring = np.zeros((span + 2, g.num_arcs), dtype=np.int64)  # prefix sums
    pointer = s0.pointer.copy()
    tokens = s0.tokens.copy()
    loads = np.zeros(g.num_arcs, dtype=np.int64)

    last_viol = -1
    history: list[tuple[int, int]] = []
    stride = max(1, (confirm + span) // max(1, history_samples))
    tau = 0  # latest known prefix-sum time point
    while True:
        if tau >= last_viol + confirm + span:
            break
        if max_steps is not None and tau >= max_steps:
            raise BudgetExhaustedError(max_steps, history)
        step_inplace(g, pointer, tokens, loads)
        cur = ring[tau % (span + 2)] + loads
        tau += 1
        ring[tau % (span + 2)] = cur

        lo = max(0, tau - span)
        rows = ring[np.arange(lo, tau) % (span + 2)]
        diffs = cur[in_cols][None, :] - rows[:, in_cols]
        gmax = np.maximum.reduceat(diffs, offsets, axis=1)
        gmin = np.minimum.reduceat(diffs, offsets, axis=1)
        bad = np.flatnonzero((gmax - gmin).max(axis=1) >= 2)
        if bad.size:
            last_viol = max(last_viol, lo + int(bad[-1]))

        t_hist = tau - span
        if t_hist >= 0 and t_hist % stride == 0:
            history.append((t_hist, _potential_sum_from_ring(ring, t_hist, span)))

    t_s = last_viol + 1
    if not with_period:
        return StabilityReport(t_s, 0, METHOD_POTENTIAL,
                               potential_sum_history=history)
    dec = _decomposition_at(g, s0, t_s)
    t_p = period_from_decomposition(dec)
    return StabilityReport(t_s, t_p, METHOD_POTENTIAL, period_bound(dec), history)


def _potential_sum_from_ring(ring: np.ndarray, t: int, span: int) -> int:
    size = span + 2
    base = ring[t % size]
    total = 0
    for i in range(1, span + 1):
        total += _sum_of_squares(ring[(t + i) % size] - base)
    return total


def potential_sum(trace: LoadTrace, t: int, i_max: int) -> int:
    """Sum of the order-1..i_max potentials of state ``t`` from a trace."""

    mat = trace.load_matrix(t, t + i_max)
    csum = np.cumsum(mat, axis=0)
    return sum(_sum_of_squares(row) for row in csum)


# ----------------------------------------------------------------------
# Subcycle decomposition
# ----------------------------------------------------------------------

@dataclass
class SubcycleDecomposition:
    """Arc-disjoint cycle partition of a stable state.

    ``mapping[e]`` is the outgoing arc that the tokens arriving along ``e``
    continue on; following it partitions all 2m arcs into directed cycles
    along which the per-arc loads rotate one position per step.
    """

    g: PortGraph
    mapping: np.ndarray
    cycles: list[np.ndarray]
    anchor_step: int
    anchor_state: RotorState
    anchor_loads: np.ndarray
    cycle_id: np.ndarray = field(init=False)
    cycle_pos: np.ndarray = field(init=False)
    _prefix: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        na = self.g.num_arcs
        self.cycle_id = np.full(na, -1, dtype=np.int64)
        self.cycle_pos = np.full(na, -1, dtype=np.int64)
        self._prefix = []
        for ci, cyc in enumerate(self.cycles):
            self.cycle_id[cyc] = ci
            self.cycle_pos[cyc] = np.arange(len(cyc))
            seq = self.anchor_loads[cyc].astype(np.int64)
            self._prefix.append(np.concatenate(([0], np.cumsum(seq))))

    @property
    def lengths(self) -> list[int]:
        return [len(c) for c in self.cycles]

    def vertex_mapping(self, v: int) -> list[tuple[int, int]]:
        """The in->out arc pairs of vertex ``v``."""

        return [(e, int(self.mapping[e])) for e in self.g.in_arcs(v)]

    def loads_at(self, tau: int) -> np.ndarray:
        """Per-arc loads at step ``tau`` >= anchor, by cycle rotation."""

        delta = tau - self.anchor_step
        if delta < 0:
            raise AnchorMismatchError("tau precedes the anchor step")
        out = np.zeros(self.g.num_arcs, dtype=np.int64)
        for cyc in self.cycles:
            seq = self.anchor_loads[cyc]
            out[cyc] = np.roll(seq, delta % len(cyc))
        return out

    def cumulative_from_anchor_all(self, tau: int) -> np.ndarray:
        """C[anchor, tau) for every arc, via per-cycle prefix sums."""

        delta = tau - self.anchor_step
        if delta < 0:
            raise AnchorMismatchError("tau precedes the anchor step")
        out = np.zeros(self.g.num_arcs, dtype=np.int64)
        for ci, cyc in enumerate(self.cycles):
            n = len(cyc)
            pref = self._prefix[ci]
            total = int(pref[-1])
            q, r = divmod(delta, n)
            idx = np.arange(n)
            vals = np.full(n, q * total, dtype=np.int64)
            if r:
                a = idx + 1 - r
                wrap = a < 0
                back = pref[np.where(wrap, a + n, a)] - np.where(wrap, total, 0)
                vals += pref[idx + 1] - back
            out[cyc] = vals
        return out

    def cumulative_from_anchor(self, e: int, tau: int) -> int:
        ci = int(self.cycle_id[e])
        i = int(self.cycle_pos[e])
        n = len(self.cycles[ci])
        pref = self._prefix[ci]
        total = int(pref[-1])
        delta = tau - self.anchor_step
        if delta < 0:
            raise AnchorMismatchError("tau precedes the anchor step")
        q, r = divmod(delta, n)
        val = q * total
        if r:
            a = i + 1 - r
            val += int(pref[i + 1]) - (int(pref[a + n]) - total if a < 0 else int(pref[a]))
        return val

    def state_at(self, tau: int) -> RotorState:
        """Reconstruct the full state at ``tau`` >= anchor in O(n + m)."""

        g = self.g
        loads = self.loads_at(tau)
        cum = self.cumulative_from_anchor_all(tau)
        starts = g.offsets[:-1]
        tokens = np.add.reduceat(loads, starts) if g.num_arcs else np.zeros(g.n, dtype=np.int64)
        throughput = np.add.reduceat(cum, starts) if g.num_arcs else np.zeros(g.n, dtype=np.int64)
        pointer = (self.anchor_state.pointer + throughput) % g.deg
        return RotorState(pointer.astype(np.int64), tokens.astype(np.int64), tau)


def extract_decomposition(g: PortGraph, trace: LoadTrace,
                          anchor_state: RotorState) -> SubcycleDecomposition:
    """Extract and validate the cycle decomposition of a stable state.

    ``anchor_state`` must be the state at some stable step T and ``trace``
    must retain the loads of steps [T, T+2m^2+1).  Per vertex, outgoing arcs
    are taken in rotor order starting at the pointer position of step T+1 and
    incoming arcs in descending lexicographic order of their cumulative-load
    vectors over the window (ties by arc id); pairing them positionally gives
    a mapping that is then checked against the one-step load-shift property
    over the whole window.  A mapping valid over 2m^2 steps stays valid
    forever, so the result needs no re-validation later.
    """

    T = anchor_state.t
    m = g.m
    need = 2 * m * m + 1
    if trace.base > T or trace.end < T + need:
        raise WindowTooShortError(
            f"need loads of steps [{T}, {T + need}), trace retains "
            f"[{trace.base}, {trace.end})"
        )
    window = trace.load_matrix(T, T + need)
    s1, _ = step(g, anchor_state)

    csum = np.cumsum(window[:-1], axis=0) if need > 1 else np.zeros((0, g.num_arcs), dtype=np.int64)
    mapping = np.full(g.num_arcs, -1, dtype=np.int64)
    for v in range(g.n):
        d = int(g.deg[v])
        o = int(g.offsets[v])
        p1 = int(s1.pointer[v])
        outs = [o + (p1 + j) % d for j in range(d)]
        ins = sorted(g.in_arcs(v), key=lambda e: ([-int(x) for x in csum[:, e]], e))
        for e_in, e_out in zip(ins, outs):
            mapping[e_in] = e_out

    # Definition check: loads shift one step along the mapping over the window
    if need > 1 and not np.array_equal(window[1:][:, mapping], window[:-1]):
        raise ValidationFailedError(
            "load rotation fails over the verification window; the anchored "
            "state is not stable"
        )

    cycles = []
    seen = np.zeros(g.num_arcs, dtype=bool)
    for a in range(g.num_arcs):
        if seen[a]:
            continue
        cyc = []
        e = a
        while not seen[e]:
            seen[e] = True
            cyc.append(e)
            e = int(mapping[e])
        cycles.append(np.array(cyc, dtype=np.int64))

    return SubcycleDecomposition(g, mapping, cycles, T, anchor_state.copy(),
                                 window[0].copy())


def period_bound(dec: SubcycleDecomposition) -> int:
    """lcm of the cycle lengths; the exact period always divides it."""

    return math.lcm(*dec.lengths) if dec.lengths else 1


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def period_from_decomposition(dec: SubcycleDecomposition) -> int:
    """Exact period of the stable state: smallest divisor of the lcm bound
    under which every cycle's load sequence is rotation-invariant and every
    vertex pushes a multiple of its degree."""

    g = dec.g
    if g.num_arcs == 0:
        return 1
    starts = g.offsets[:-1]
    for delta in _divisors(period_bound(dec)):
        ok = all(
            np.array_equal(dec.anchor_loads[cyc],
                           np.roll(dec.anchor_loads[cyc], delta % len(cyc)))
            for cyc in dec.cycles
        )
        if not ok:
            continue
        throughput = np.add.reduceat(dec.cumulative_from_anchor_all(dec.anchor_step + delta), starts)
        if (throughput % g.deg == 0).all():
            return delta
    raise AssertionError("no divisor of the lcm bound is a period; decomposition invalid")


def state_at(g: PortGraph, s0: RotorState, dec: SubcycleDecomposition,
             t_stable: int, tau: int) -> RotorState:
    """State at ``tau`` >= t_stable reconstructed from the decomposition."""

    if dec.anchor_step != t_stable:
        raise AnchorMismatchError(
            f"decomposition anchored at {dec.anchor_step}, not {t_stable}"
        )
    if tau < t_stable:
        raise AnchorMismatchError("tau precedes the stable anchor")
    return dec.state_at(tau)


# ----------------------------------------------------------------------
# Orchestration
# ----------------------------------------------------------------------

def _decomposition_at(g: PortGraph, s0: RotorState, t_s: int) -> SubcycleDecomposition:
    """Replay to the stable step and extract the decomposition there."""

    anchor, _ = run(g, s0, t_s, window=0)
    need = 2 * g.m * g.m + 1
    _, trace = run(g, anchor, need, window=need)
    return extract_decomposition(g, trace, anchor)


@dataclass
class StabilizeResult:
    reports: dict[str, StabilityReport]
    decomposition: SubcycleDecomposition | None

    @property
    def report(self) -> StabilityReport:
        return next(iter(self.reports.values()))


def stabilize(g: PortGraph, s0: RotorState, method: str = "potential",
              max_steps: int | None = None,
              with_decomposition: bool = True) -> StabilizeResult:
    """Run the chosen detector(s) and attach the validated decomposition.

    ``method`` is ``potential``, ``hash``, or ``both`` (the latter also
    cross-checks that the two detectors agree on t_s).
    """

    if method not in ("potential", "hash", "both"):
        raise ValueError(f"unknown method {method!r}")
    reports: dict[str, StabilityReport] = {}
    if method in ("hash", "both"):
        reports["hash"] = detect_stable_hash(g, s0, max_steps)
    if method in ("potential", "both"):
        reports["potential"] = detect_stable_potential(
            g, s0, max_steps, with_period=not with_decomposition
        )
    if method == "both":
        if reports["hash"].t_s != reports["potential"].t_s:
            raise AssertionError(
                f"detector disagreement: hash t_s={reports['hash'].t_s}, "
                f"potential t_s={reports['potential'].t_s}"
            )
    dec = None
    if with_decomposition:
        t_s = next(iter(reports.values())).t_s
        dec = _decomposition_at(g, s0, t_s)
        lcm = period_bound(dec)
        t_p = (reports.get("hash") or reports["potential"]).t_p
        if "hash" not in reports:
            t_p = period_from_decomposition(dec)
        for rep in reports.values():
            rep.lcm_bound = lcm
            if rep.t_p == 0:
                rep.t_p = t_p
    return StabilizeResult(reports, dec)
