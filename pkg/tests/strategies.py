from hypothesis import strategies as st

from rwhdp.graph import Graph


@st.composite
def graphs(draw, max_nodes=12, min_nodes=1, allow_loops=True):
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u if allow_loops else u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = draw(st.lists(st.floats(0.01, 100.0), min_size=len(chosen), max_size=len(chosen)))
    return Graph.from_edges(n, [(u, v, w) for (u, v), w in zip(chosen, weights)])


def random_graph(rng, max_nodes=12, loops=True):
    """Seeded random graph for loops that do not go through hypothesis."""
    n = int(rng.integers(2, max_nodes + 1))
    p = rng.random()
    edges = []
    for u in range(n):
        for v in range(u if loops else u + 1, n):
            if rng.random() < p:
                edges.append((u, v, float(rng.uniform(0.1, 5.0))))
    return Graph.from_edges(n, edges)
