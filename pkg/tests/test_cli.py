import csv
import json
from pathlib import Path

import numpy as np
import pytest

import rotor_router as rr
from rotor_router import generators
from rotor_router.cli import main
from rotor_router.single_token import build_phase_index, position_at, visits_before


@pytest.fixture
def g5_file(tmp_path):
    g, s = generators.gen_balloon(5)
    p = tmp_path / "g5.txt"
    p.write_text(rr.serialize_state(g, s), encoding="utf-8")
    return str(p)


def test_gen_subcommands(tmp_path):
    out = tmp_path / "g.txt"
    assert main(["gen", "balloon", "--x", "5", "-o", str(out)]) == 0
    g, s = rr.parse_graph(out.read_text())
    assert (g.n, s.k) == (6, 12)
    assert main(["gen", "multi-balloon", "--r", "2", "-o", str(out)]) == 0
    assert main(["gen", "lb-path", "--n", "16", "-o", str(out)]) == 0
    assert main(["gen", "lb-path-cliques", "--N", "12", "--M", "20", "-o", str(out)]) == 0
    assert main(["gen", "std", "--kind", "random", "--n", "10", "--seed", "7",
                 "-o", str(out)]) == 0
    first = out.read_text()
    assert main(["gen", "std", "--kind", "random", "--n", "10", "--seed", "7",
                 "-o", str(out)]) == 0
    assert out.read_text() == first  # deterministic
    assert main(["gen", "std", "--kind", "cycle", "--n", "6", "--format", "json",
                 "-o", str(out)]) == 0
    g2, _ = rr.parse_graph(out.read_text())
    assert g2.m == 6


def test_simulate_emits_loads_and_potentials(tmp_path, g5_file):
    loads_csv = tmp_path / "loads.csv"
    phi_csv = tmp_path / "phi.csv"
    state_out = tmp_path / "after.txt"
    rc = main(["simulate", "--graph", g5_file, "--steps", "6",
               "--emit-loads", str(loads_csv), "--emit-potentials", str(phi_csv),
               "--imax", "3", "-o", str(state_out)])
    assert rc == 0
    g, s0 = rr.parse_graph(Path(g5_file).read_text())
    _, trace = rr.run(g, s0, 6, window=6)
    rows = list(csv.DictReader(loads_csv.open()))
    assert len(rows) == 6 * g.num_arcs
    for row in rows[: g.num_arcs]:
        assert int(row["load"]) == trace.loads(0)[int(row["arc_id"])]
    phi_rows = list(csv.DictReader(phi_csv.open()))
    for row in phi_rows:
        t, i = int(row["step"]), int(row["i"])
        assert int(row["phi"]) == trace.potential(t, i)
    # final state round-trips and matches a direct run
    _, s6 = rr.parse_graph(state_out.read_text())
    want, _ = rr.run(g, s0, 6, window=0)
    assert s6 == want


def test_stabilize_report(tmp_path, g5_file):
    report = tmp_path / "report.json"
    rc = main(["stabilize", "--graph", g5_file, "--method", "both",
               "--report", str(report)])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["agreement"] is True
    assert doc["t_p"] == 5
    assert doc["lcm_bound"] % 5 == 0
    covered = sorted(a for cyc in doc["cycles"] for a in cyc)
    assert covered == list(range(12))
    assert doc["reports"]["hash"]["method"] == "hash-oracle"


def test_period_command(capsys, g5_file):
    assert main(["period", "--graph", g5_file]) == 0
    out = capsys.readouterr().out
    assert "t_p=5" in out


def test_single_index_cli(tmp_path, g5_file):
    idx_path = tmp_path / "index.bin"
    assert main(["single", "build", "--graph", g5_file, "--start", "0",
                 "-o", str(idx_path)]) == 0
    g, _ = rr.parse_graph(Path(g5_file).read_text())
    idx = build_phase_index(g, 0)
    assert main(["single", "pos", "--index", str(idx_path), "--time", "7"]) == 0
    assert main(["single", "visits", "--index", str(idx_path),
                 "--node", "3", "--time", "9"]) == 0


def test_single_pos_value(capsys, tmp_path, g5_file):
    idx_path = tmp_path / "index.bin"
    main(["single", "build", "--graph", g5_file, "--start", "0", "-o", str(idx_path)])
    capsys.readouterr()
    main(["single", "pos", "--index", str(idx_path), "--time", "5"])
    out = capsys.readouterr().out
    g, _ = rr.parse_graph(Path(g5_file).read_text())
    assert f"arc {position_at(build_phase_index(g, 0), 5)} " in out
    main(["single", "visits", "--index", str(idx_path), "--node", "1", "--time", "11"])
    out = capsys.readouterr().out.strip()
    assert int(out) == visits_before(build_phase_index(g, 0), 1, 11)


def test_mquery_cli(tmp_path, capsys, g5_file):
    idx_path = tmp_path / "midx.bin"
    assert main(["mquery", "build", "--graph", g5_file, "-o", str(idx_path)]) == 0
    state_path = tmp_path / "state7.txt"
    assert main(["mquery", "state", "--index", str(idx_path), "--time", "7",
                 "-o", str(state_path)]) == 0
    g, s0 = rr.parse_graph(Path(g5_file).read_text())
    want, _ = rr.run(g, s0, 7, window=0)
    _, got = rr.parse_graph(state_path.read_text())
    assert got == want
    capsys.readouterr()
    assert main(["mquery", "visits", "--index", str(idx_path), "--arc", "0",
                 "--time", "10"]) == 0
    printed = int(capsys.readouterr().out.strip())
    _, trace = rr.run(g, s0, 10, window=10)
    assert printed == trace.cumulative(0, 10, 0)


def test_experiment_csv_json_and_figure(tmp_path):
    out_csv = tmp_path / "oracle.csv"
    rc = main(["experiment", "--plan", "oracle-agreement", "--seed", "1",
               "--param", "instances=4", "-o", str(out_csv)])
    assert rc == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 4
    assert all(r["mismatch"] == "False" for r in rows)
    assert (tmp_path / "oracle.png").exists()

    out_json = tmp_path / "oracle.json"
    rc = main(["experiment", "--plan", "oracle-agreement", "--seed", "1",
               "--param", "instances=4", "-o", str(out_json),
               "--format", "json", "--no-figures"])
    assert rc == 0
    doc = json.loads(out_json.read_text())
    assert doc["schema"] == "rotor-report v1"
    assert len(doc["rows"]) == 4
    assert not (tmp_path / "oracle.json.png").exists()


def test_experiment_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path in (a, b):
        rc = main(["experiment", "--plan", "balloon-period-sweep", "--seed", "3",
                   "--param", "xs=4,5", "--param", "rs=1,2",
                   "-o", str(path), "--no-figures"])
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(tmp_path, g5_file):
    # input error: missing file
    assert main(["period", "--graph", str(tmp_path / "nope.txt")]) == 3
    # input error: malformed graph
    bad = tmp_path / "bad.txt"
    bad.write_text("rotor-graph v1\nnodes 2\nnode 0 ports 9\nnode 1 ports 0\n")
    report = tmp_path / "r.json"
    assert main(["stabilize", "--graph", str(bad), "--report", str(report)]) == 3
    # budget exhausted
    lb = tmp_path / "lb.txt"
    main(["gen", "lb-path", "--n", "16", "-o", str(lb)])
    assert main(["period", "--graph", str(lb), "--max-steps", "10"]) == 2
