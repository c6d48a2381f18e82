import numpy as np
import pytest

from rotor_router import generators, make_state


@pytest.fixture
def balloon5():
    return generators.gen_balloon(5)


@pytest.fixture
def triangle():
    g, _ = generators.gen_standard("cycle", 3)
    return g


def single_token_state(g, v0):
    tokens = np.zeros(g.n, dtype=np.int64)
    tokens[v0] = 1
    return make_state(g, tokens=tokens)
