import pytest

import rotor_router as rr
from rotor_router import generators
from rotor_router.graph import GraphFormatError

from oracles import diameter_oracle, two_coloring_oracle

TWO_NODE = """\
rotor-graph v1
nodes 2
node 0 ports 1 tokens 1
node 1 ports 0
"""


def test_parse_two_node_path():
    g, s = rr.parse_graph(TWO_NODE)
    assert (g.n, g.m) == (2, 1)
    assert s.tokens.tolist() == [1, 0]
    assert s.pointer.tolist() == [0, 0]


def test_parse_balloon_g5_roundtrip(balloon5):
    g, s = balloon5
    text = rr.serialize_state(g, s)
    g2, s2 = rr.parse_graph(text)
    # the paper's balloon on x=5: x+1 vertices, 2(x+1) arcs and tokens
    assert (g2.n, g2.m, g2.num_arcs, s2.k) == (6, 6, 12, 12)
    assert rr.serialize_state(g2, s2) == text


def test_parse_rejects_dangling_neighbour():
    bad = TWO_NODE.replace("node 1 ports 0", "node 1 ports 7")
    with pytest.raises(GraphFormatError, match="line 4.*neighbour 7"):
        rr.parse_graph(bad)


@pytest.mark.parametrize("mangle,pattern", [
    (lambda t: t.replace("rotor-graph v1", "rotor v2"), "header"),
    (lambda t: t.replace("node 1 ports 0", "node 1 ports"), "no ports"),
    (lambda t: t.replace("tokens 1", "tokens -3"), "negative token"),
    (lambda t: t.replace("node 0 ports 1", "node 0 ports 1 pointer 5"), "pointer 5"),
    (lambda t: t + "node 1 ports 0\n", "duplicate node 1"),
    (lambda t: t.replace("node 1 ports 0\n", ""), "missing 'node 1'"),
])
def test_parse_diagnostics(mangle, pattern):
    with pytest.raises(GraphFormatError, match=pattern):
        rr.parse_graph(mangle(TWO_NODE))


def test_parse_rejects_disconnected():
    text = (
        "rotor-graph v1\nnodes 4\n"
        "node 0 ports 1\nnode 1 ports 0\nnode 2 ports 3\nnode 3 ports 2\n"
    )
    with pytest.raises(GraphFormatError, match="not connected"):
        rr.parse_graph(text)


def test_constructor_rejects_self_loop_and_parallel():
    with pytest.raises(GraphFormatError, match="self-loop"):
        rr.PortGraph([[0, 1], [0]])
    with pytest.raises(GraphFormatError, match="parallel"):
        rr.PortGraph([[1, 1], [0, 0]])


def test_json_mirror_roundtrip(balloon5):
    g, s = balloon5
    text = rr.serialize_state(g, s, fmt="json")
    g2, s2 = rr.parse_graph(text, fmt="json")
    assert g2.ports == g.ports
    assert s2 == s
    # auto-detection
    g3, _ = rr.parse_graph(text)
    assert g3.ports == g.ports


def test_serialize_after_steps_roundtrips(balloon5):
    g, s = balloon5
    s3, _ = rr.run(g, s, 3, window=0)
    text = rr.serialize_state(g, s3)
    _, s3b = rr.parse_graph(text)
    assert s3b == s3


def test_serialize_zero_tokens(balloon5):
    g, _ = balloon5
    s = rr.make_state(g)
    _, s2 = rr.parse_graph(rr.serialize_state(g, s))
    assert s2.tokens.tolist() == [0] * g.n


@pytest.mark.parametrize("kind,n,expect", [("path", 5, 4), ("clique", 4, 1)])
def test_diameter_basics(kind, n, expect):
    g, _ = generators.gen_standard(kind, n)
    assert g.diameter == expect


def test_diameter_balloon_vs_bfs_oracle(balloon5):
    g, _ = balloon5
    assert g.diameter == diameter_oracle(g) == 3


def test_reverse_pairing_involution():
    for i in range(8):
        g, _ = generators.random_instance(i, n_max=9, k_max=0)
        for a in range(g.num_arcs):
            b = int(g.rev[a])
            assert int(g.rev[b]) == a
            assert (int(g.tail[a]), int(g.head[a])) == (int(g.head[b]), int(g.tail[b]))


def test_bipartite_flag_matches_oracle():
    for i in range(12):
        g, _ = generators.random_instance(40 + i, n_max=9, k_max=0)
        ok, _ = two_coloring_oracle(g)
        assert g.bipartite == ok
    g, _ = generators.gen_standard("cycle", 4)
    assert g.bipartite
    g, _ = generators.gen_standard("cycle", 5)
    assert not g.bipartite


def test_ports_are_permutations_of_out_arcs():
    g, _ = generators.random_instance(3, n_max=8, k_max=0)
    for v in range(g.n):
        assert len(g.ports[v]) == int(g.deg[v])
        heads = {int(g.head[a]) for a in g.out_arcs(v)}
        assert heads == set(g.ports[v])
