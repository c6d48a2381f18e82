"""`rotor` command line: simulate, stabilize, period, gen, single, mquery,
experiment.

Exit codes: 0 on success, 2 when any requested run exhausts its step budget,
3 on input errors (bad files, bad parameters).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, generators, multi_query, single_token
from .engine import step_inplace, _sum_of_squares
from .graph import GraphFormatError, parse_graph, serialize_state
from .stability import BudgetExhaustedError, stabilize


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except BudgetExhaustedError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (GraphFormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rotor",
                                description="parallel rotor-router walks: "
                                            "simulation, lock-in analysis, queries")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run T steps, optionally dumping loads/potentials")
    _graph_arg(sim)
    sim.add_argument("--steps", type=int, required=True)
    sim.add_argument("--emit-loads", metavar="CSV")
    sim.add_argument("--emit-potentials", metavar="CSV")
    sim.add_argument("--imax", type=int, default=1,
                     help="largest potential order for --emit-potentials")
    sim.add_argument("-o", "--output", metavar="FILE",
                     help="write the final state (graph file format)")
    sim.set_defaults(func=_cmd_simulate)

    st = sub.add_parser("stabilize", help="detect lock-in and report t_s, t_p, cycles")
    _graph_arg(st)
    st.add_argument("--method", choices=("potential", "hash", "both"), default="potential")
    st.add_argument("--max-steps", type=int)
    st.add_argument("--report", metavar="JSON", required=True)
    st.add_argument("--skip-decomposition", action="store_true",
                    help="skip cycle extraction (cheaper for huge runs)")
    st.set_defaults(func=_cmd_stabilize)

    pe = sub.add_parser("period", help="print the detected period and its lcm bound")
    _graph_arg(pe)
    pe.add_argument("--max-steps", type=int)
    pe.set_defaults(func=_cmd_period)

    gen = sub.add_parser("gen", help="write a generated instance")
    gsub = gen.add_subparsers(dest="kind", required=True)
    gb = gsub.add_parser("balloon")
    gb.add_argument("--x", type=int, required=True)
    gb.set_defaults(func=lambda a: _emit_gen(a, *generators.gen_balloon(a.x)))
    gm = gsub.add_parser("multi-balloon")
    gm.add_argument("--r", type=int, required=True)
    gm.set_defaults(func=lambda a: _emit_gen(a, *generators.gen_multi_balloon(a.r)))
    gl = gsub.add_parser("lb-path")
    gl.add_argument("--n", type=int, required=True)
    gl.set_defaults(func=lambda a: _emit_gen(a, *generators.gen_lb_path(a.n)))
    gc = gsub.add_parser("lb-path-cliques")
    gc.add_argument("--N", type=int, required=True)
    gc.add_argument("--M", type=int, required=True)
    gc.set_defaults(func=lambda a: _emit_gen(a, *generators.gen_lb_path_cliques(a.N, a.M)))
    gs = gsub.add_parser("std")
    gs.add_argument("--kind", dest="std_kind", required=True,
                    choices=("cycle", "path", "clique", "random", "random_connected"))
    gs.add_argument("--n", type=int, required=True)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--tokens", type=int, default=0,
                    help="scatter this many tokens at random vertices")
    gs.set_defaults(func=_cmd_gen_std)
    for sp in (gb, gm, gl, gc, gs):
        sp.add_argument("-o", "--output", metavar="FILE")
        sp.add_argument("--format", choices=("text", "json"), default="text")

    si = sub.add_parser("single", help="single-token index: build and query")
    ssub = si.add_subparsers(dest="action", required=True)
    sb = ssub.add_parser("build")
    _graph_arg(sb)
    sb.add_argument("--start", type=int, required=True)
    sb.add_argument("--use-state-pointers", action="store_true",
                    help="index the file's pointer state instead of the port-0 reset")
    sb.add_argument("-o", "--output", required=True)
    sb.set_defaults(func=_cmd_single_build)
    sp_ = ssub.add_parser("pos")
    sp_.add_argument("--index", required=True)
    sp_.add_argument("--time", type=int, required=True)
    sp_.set_defaults(func=_cmd_single_pos)
    sv = ssub.add_parser("visits")
    sv.add_argument("--index", required=True)
    sv.add_argument("--node", type=int, required=True)
    sv.add_argument("--time", type=int, required=True)
    sv.set_defaults(func=_cmd_single_visits)

    mq = sub.add_parser("mquery", help="multi-token index: build and query")
    msub = mq.add_subparsers(dest="action", required=True)
    mb = msub.add_parser("build")
    _graph_arg(mb)
    mb.add_argument("--budget", type=int)
    mb.add_argument("--dense", action="store_true",
                    help="store every pre-stable step (O(n+m) queries, O(T) memory)")
    mb.add_argument("-o", "--output", required=True)
    mb.set_defaults(func=_cmd_mquery_build)
    ms = msub.add_parser("state")
    ms.add_argument("--index", required=True)
    ms.add_argument("--time", type=int, required=True)
    ms.add_argument("-o", "--output", metavar="FILE")
    ms.set_defaults(func=_cmd_mquery_state)
    mv = msub.add_parser("visits")
    mv.add_argument("--index", required=True)
    mv.add_argument("--arc", type=int, required=True)
    mv.add_argument("--time", type=int, required=True)
    mv.set_defaults(func=_cmd_mquery_visits)

    ex = sub.add_parser("experiment", help="run a named reproduction plan")
    ex.add_argument("--plan", required=True, choices=experiments.PLAN_NAMES)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="plan parameter override, repeatable "
                         "(e.g. instances=10 or ns=64,128)")
    ex.add_argument("-o", "--output", required=True)
    ex.add_argument("--format", choices=("csv", "json"), default="csv")
    ex.add_argument("--no-figures", action="store_true",
                    help="skip the companion PNG figure")
    ex.set_defaults(func=_cmd_experiment)

    return p


def _graph_arg(sp) -> None:
    sp.add_argument("--graph", required=True, metavar="FILE")
    sp.add_argument("--graph-format", choices=("auto", "text", "json"), default="auto")


def _load(args):
    text = Path(args.graph).read_text(encoding="utf-8")
    return parse_graph(text, fmt=args.graph_format)


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    g, s = _load(args)
    loads_writer = None
    loads_fh = None
    if args.emit_loads:
        loads_fh = open(args.emit_loads, "w", newline="", encoding="utf-8")
        loads_writer = csv.writer(loads_fh, lineterminator="\n")
        loads_writer.writerow(["step", "arc_id", "load"])
    imax = max(1, args.imax)
    phi_rows = []
    span = imax + 1
    ring = np.zeros((span + 1, g.num_arcs), dtype=np.int64)
    loads = np.zeros(g.num_arcs, dtype=np.int64)
    try:
        for t in range(args.steps):
            step_inplace(g, s.pointer, s.tokens, loads)
            if loads_writer is not None:
                for a in range(g.num_arcs):
                    loads_writer.writerow([t, a, int(loads[a])])
            if args.emit_potentials:
                ring[(t + 1) % (span + 1)] = ring[t % (span + 1)] + loads
                for i in range(1, min(imax, t + 1) + 1):
                    anchor = t + 1 - i
                    phi = _sum_of_squares(ring[(t + 1) % (span + 1)] - ring[anchor % (span + 1)])
                    phi_rows.append((anchor, i, phi))
    finally:
        if loads_fh is not None:
            loads_fh.close()
    s.t += args.steps
    if args.emit_potentials:
        phi_rows.sort()
        with open(args.emit_potentials, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "i", "phi"])
            w.writerows(phi_rows)
    if args.output:
        _write(args.output, serialize_state(g, s))
    print(f"ran {args.steps} steps; tokens now {s.tokens.tolist()}")
    return 0


def _cmd_stabilize(args) -> int:
    g, s0 = _load(args)
    res = stabilize(g, s0, method=args.method, max_steps=args.max_steps,
                    with_decomposition=not args.skip_decomposition)
    doc = {
        "n": g.n, "m": g.m, "diameter": g.diameter, "k": s0.k,
        "method": args.method,
        "reports": {name: rep.to_dict() for name, rep in res.reports.items()},
    }
    primary = res.report
    doc.update(primary.to_dict())
    if args.method == "both":
        doc["agreement"] = (res.reports["hash"].t_s == res.reports["potential"].t_s)
    if res.decomposition is not None:
        doc["cycles"] = [c.tolist() for c in res.decomposition.cycles]
        doc["cycle_lengths"] = res.decomposition.lengths
    Path(args.report).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    print(f"t_s={primary.t_s} t_p={primary.t_p} lcm_bound={primary.lcm_bound} "
          f"-> {args.report}")
    return 0


def _cmd_period(args) -> int:
    g, s0 = _load(args)
    res = stabilize(g, s0, method="hash", max_steps=args.max_steps)
    rep = res.report
    print(f"t_p={rep.t_p} lcm_bound={rep.lcm_bound} t_s={rep.t_s}")
    return 0


def _emit_gen(args, g, s0) -> int:
    _write(args.output, serialize_state(g, s0, fmt=args.format))
    if args.output:
        print(f"wrote {args.output}: n={g.n} m={g.m} k={s0.k}")
    return 0


def _cmd_gen_std(args) -> int:
    kind = "random_connected" if args.std_kind == "random" else args.std_kind
    g, s0 = generators.gen_standard(kind, args.n, seed=args.seed)
    if args.tokens:
        s0 = generators.random_state(g, args.tokens, seed=args.seed)
    return _emit_gen(args, g, s0)


def _cmd_single_build(args) -> int:
    g, s0 = _load(args)
    state = s0 if args.use_state_pointers else None
    idx = single_token.build_phase_index(g, args.start, state=state)
    single_token.save_index(idx, args.output)
    print(f"indexed: phases={idx.p} exploration_length={idx.length} "
          f"arcs={idx.num_arcs} -> {args.output}")
    return 0


def _cmd_single_pos(args) -> int:
    idx = single_token.load_index(args.index)
    arc = single_token.position_at(idx, args.time)
    print(f"arc {arc} ({int(idx.tail[arc])}->{int(idx.head[arc])})")
    return 0


def _cmd_single_visits(args) -> int:
    idx = single_token.load_index(args.index)
    print(single_token.visits_before(idx, args.node, args.time))
    return 0


def _cmd_mquery_build(args) -> int:
    g, s0 = _load(args)
    idx = multi_query.build_multi_index(g, s0, budget=args.budget, dense=args.dense)
    multi_query.save_multi_index(idx, args.output)
    print(f"t_stable={idx.t_stable} t_p={idx.t_p} lcm_bound={idx.lcm_bound} "
          f"worst_case_budget={idx.budget_bound} -> {args.output}")
    return 0


def _cmd_mquery_state(args) -> int:
    idx = multi_query.load_multi_index(args.index)
    state = multi_query.query_state(idx, args.time)
    text = serialize_state(idx.g, state)
    _write(args.output, text)
    if args.output:
        print(f"state at {args.time} -> {args.output}")
    return 0


def _cmd_mquery_visits(args) -> int:
    idx = multi_query.load_multi_index(args.index)
    print(multi_query.query_visits(idx, args.arc, args.time))
    return 0


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for item in pairs:
        key, _, value = item.partition("=")
        if not key or not value:
            raise ValueError(f"--param expects KEY=VALUE, got {item!r}")
        if "," in value:
            params[key] = tuple(int(x) for x in value.split(","))
        else:
            try:
                params[key] = int(value)
            except ValueError:
                params[key] = value
    return params


def _cmd_experiment(args) -> int:
    plan = experiments.ExperimentPlan(args.plan, seed=args.seed,
                                      params=_parse_params(args.param))
    result = experiments.run_experiment(plan)
    text = (experiments.to_csv(result) if args.format == "csv"
            else experiments.to_json(result))
    Path(args.output).write_text(text, encoding="utf-8")
    made = [args.output]
    if not args.no_figures:
        from . import plots

        png = str(Path(args.output).with_suffix(".png"))
        plots.render_figure(result, png)
        made.append(png)
    print(f"wrote {', '.join(made)}")
    return 2 if result.budget_exhausted else 0


if __name__ == "__main__":
    sys.exit(main())
