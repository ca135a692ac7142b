import numpy as np
import pytest
from hypothesis import strategies as st

from cyclesync.graph import build_view_graph

# Invariant properties run this many randomized cases each.
PROPERTY_CASES = 1000


@st.composite
def small_graphs(draw, max_n=30, min_n=1):
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        return build_view_graph(n, [])
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return build_view_graph(n, [p for p, keep in zip(pairs, mask) if keep])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
