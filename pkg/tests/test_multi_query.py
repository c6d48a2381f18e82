import random

import numpy as np
import pytest

import rotor_router as rr
from rotor_router import generators
from rotor_router.multi_query import (
    build_multi_index,
    load_multi_index,
    query_state,
    query_visits,
    save_multi_index,
)
from rotor_router.single_token import build_phase_index, position_at

from conftest import single_token_state
from oracles import naive_run


def naive_reference(g, s0, horizon):
    states, loads = naive_run(g, s0, horizon)
    visits = [np.zeros(g.num_arcs, dtype=np.int64)]
    for t in range(horizon):
        visits.append(visits[-1] + np.array(loads[t]))
    return states, visits


def test_zero_tokens_index():
    g, _ = generators.gen_standard("cycle", 5)
    idx = build_multi_index(g, rr.make_state(g))
    assert idx.t_stable == 0 and idx.t_p == 1
    st = query_state(idx, 123)
    assert st.tokens.sum() == 0
    assert query_visits(idx, 0, 10**6) == 0


def test_single_token_agrees_with_phase_index(balloon5):
    g, _ = balloon5
    v0 = 2
    s0 = single_token_state(g, v0)
    midx = build_multi_index(g, s0)
    pidx = build_phase_index(g, v0)
    for tau in range(1, pidx.length + 20):
        arc = position_at(pidx, tau)
        st = query_state(midx, tau)
        assert st.tokens.tolist()[int(g.head[arc])] == 1
        assert st.tokens.sum() == 1
    # per-arc visit growth is exactly 1 per 2m steps once locked in
    for e in range(g.num_arcs):
        base = query_visits(midx, e, pidx.length)
        for laps in (1, 2, 5):
            assert query_visits(midx, e, pidx.length + laps * g.num_arcs) == base + laps


def test_balloon_index_anchors_immediately(balloon5):
    g, s0 = balloon5
    idx = build_multi_index(g, s0)
    assert idx.t_stable <= 1
    assert idx.t_p == 5


def test_query_state_and_visits_match_naive():
    for i in range(8):
        g, s0 = generators.random_instance(4000 + i, n_max=8, k_max=6)
        idx = build_multi_index(g, s0)
        horizon = idx.t_stable + 3 * idx.lcm_bound
        states, visits = naive_reference(g, s0, horizon)
        rng = random.Random(i)
        taus = [0, idx.t_stable, horizon] + [rng.randint(0, horizon) for _ in range(60)]
        for tau in taus:
            st = query_state(idx, tau)
            assert st.pointer.tolist() == states[tau][0]
            assert st.tokens.tolist() == states[tau][1]
            e = rng.randrange(g.num_arcs)
            assert query_visits(idx, e, tau) == int(visits[tau][e])


def test_visits_additivity_matches_trace():
    g, s0 = generators.random_instance(4100, n_max=7, k_max=5)
    idx = build_multi_index(g, s0)
    horizon = idx.t_stable + 2 * idx.lcm_bound + 7
    _, trace = rr.run(g, s0, horizon, window=horizon)
    rng = random.Random(1)
    for _ in range(40):
        t1 = rng.randint(0, horizon)
        t2 = rng.randint(t1, horizon)
        e = rng.randrange(g.num_arcs)
        assert (query_visits(idx, e, t2) - query_visits(idx, e, t1)
                == trace.cumulative(t1, t2, e))


def test_query_state_tau_and_tau_plus_lcm_identical():
    g, s0 = generators.random_instance(4200, n_max=7, k_max=4)
    idx = build_multi_index(g, s0)
    tau = idx.t_stable + 3
    a = query_state(idx, tau)
    b = query_state(idx, tau + idx.lcm_bound)
    assert a.pointer.tolist() == b.pointer.tolist()
    assert a.tokens.tolist() == b.tokens.tolist()


def test_dense_mode_equivalent():
    g, s0 = generators.random_instance(4300, n_max=7, k_max=4)
    sparse = build_multi_index(g, s0)
    dense = build_multi_index(g, s0, dense=True)
    assert dense.stride == 1
    horizon = sparse.t_stable + sparse.lcm_bound + 5
    for tau in range(horizon):
        assert query_state(sparse, tau) == query_state(dense, tau)
        assert query_visits(sparse, 1, tau) == query_visits(dense, 1, tau)


def test_budget_reported_and_respected():
    g, s0 = generators.gen_lb_path(12)
    with pytest.raises(rr.BudgetExhaustedError):
        build_multi_index(g, s0, budget=2 * g.m * g.m + 3 * g.m)
    idx = build_multi_index(g, s0)
    assert idx.budget_bound == rr.theorem8_budget(g.m, g.diameter, 2)


def test_save_load_roundtrip(tmp_path):
    g, s0 = generators.random_instance(4400, n_max=7, k_max=5)
    idx = build_multi_index(g, s0)
    path = str(tmp_path / "midx.bin")
    save_multi_index(idx, path)
    idx2 = load_multi_index(path)
    assert idx2.t_stable == idx.t_stable and idx2.t_p == idx.t_p
    horizon = idx.t_stable + idx.lcm_bound + 5
    rng = random.Random(0)
    for _ in range(30):
        tau = rng.randint(0, horizon)
        assert query_state(idx2, tau) == query_state(idx, tau)
        e = rng.randrange(g.num_arcs)
        assert query_visits(idx2, e, tau) == query_visits(idx, e, tau)


def test_invalid_queries():
    g, s0 = generators.random_instance(4500, n_max=6, k_max=3)
    idx = build_multi_index(g, s0)
    with pytest.raises(ValueError):
        query_state(idx, -1)
    with pytest.raises(ValueError):
        query_visits(idx, g.num_arcs, 3)
