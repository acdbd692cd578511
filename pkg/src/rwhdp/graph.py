"""Undirected weighted graphs over dense integer node ids.

Nodes carry external string labels; internally they are numbered
``0 .. V-1`` in order of first appearance in the edge list.
"""
from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed or invalid edge-list input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    """Symmetric weighted adjacency.

    ``adjacency[i]`` is a tuple of ``(neighbor, weight)`` pairs sorted by
    neighbor id. A self-loop on ``i`` appears once in ``adjacency[i]``.
    """

    num_nodes: int
    adjacency: tuple[tuple[tuple[int, float], ...], ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.adjacency) != self.num_nodes:
            raise ValueError("adjacency length does not match num_nodes")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.num_nodes)))
        elif len(self.labels) != self.num_nodes:
            raise ValueError("labels length does not match num_nodes")

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[tuple[int, int, float]],
                   labels: Sequence[str] | None = None) -> "Graph":
        """Build a graph from ``(u, v, weight)`` triples; repeated pairs accumulate."""
        acc: list[dict[int, float]] = [{} for _ in range(num_nodes)]
        for u, v, w in edges:
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ValueError(f"edge ({u}, {v}) outside [0, {num_nodes})")
            if not w > 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            acc[u][v] = acc[u].get(v, 0.0) + w
            if u != v:
                acc[v][u] = acc[v].get(u, 0.0) + w
        adjacency = tuple(tuple(sorted(nbrs.items())) for nbrs in acc)
        return cls(num_nodes, adjacency, tuple(labels) if labels is not None else ())

    def neighbors(self, i: int) -> tuple[tuple[int, float], ...]:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def edges(self) -> list[tuple[int, int, float]]:
        """Each undirected edge once as ``(u, v, weight)`` with ``u <= v``."""
        return [(u, v, w) for u, nbrs in enumerate(self.adjacency) for v, w in nbrs if u <= v]

    @property
    def num_edges(self) -> int:
        return len(self.edges())

    def scaled(self, factor: float) -> "Graph":
        """Copy of the graph with every weight multiplied by ``factor``."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        adjacency = tuple(tuple((v, w * factor) for v, w in nbrs) for nbrs in self.adjacency)
        return Graph(self.num_nodes, adjacency, self.labels)


def _parse_weight(token: str, lineno: int) -> float:
    try:
        weight = float(token)
    except ValueError:
        raise GraphFormatError(f"weight {token!r} is not a number", lineno) from None
    if not weight > 0 or not np.isfinite(weight):
        raise GraphFormatError(f"weight must be positive and finite, got {token}", lineno)
    return weight


def load_edge_list(source: IO[str] | Iterable[str]) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines are ``u v`` or ``u v weight``; blank lines and lines starting with
    ``#`` are skipped. Weight defaults to 1.0, duplicate pairs accumulate,
    self-loops are kept.
    """
    ids: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 2:
            weight = 1.0
        elif len(parts) == 3:
            weight = _parse_weight(parts[2], lineno)
        else:
            raise GraphFormatError(f"expected 'u v [weight]', got {len(parts)} fields", lineno)
        u = ids.setdefault(parts[0], len(ids))
        v = ids.setdefault(parts[1], len(ids))
        edges.append((u, v, weight))
    return Graph.from_edges(len(ids), edges, labels=list(ids))


def write_edge_list(g: Graph, dest: IO[str]) -> None:
    for u, v, w in g.edges():
        dest.write(f"{g.labels[u]} {g.labels[v]} {w!r}\n")


def write_label_map(g: Graph | Sequence[str], dest: IO[str]) -> None:
    labels = g.labels if isinstance(g, Graph) else g
    for i, label in enumerate(labels):
        dest.write(f"{label} {i}\n")


def load_label_map(source: IO[str] | Iterable[str]) -> list[str]:
    """Read a ``label id`` map; ids must be exactly ``0 .. V-1``."""
    pairs: dict[int, str] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError("expected 'label id'", lineno)
        try:
            idx = int(parts[1])
        except ValueError:
            raise GraphFormatError(f"id {parts[1]!r} is not an integer", lineno) from None
        if idx in pairs:
            raise GraphFormatError(f"duplicate id {idx}", lineno)
        pairs[idx] = parts[0]
    if sorted(pairs) != list(range(len(pairs))):
        raise GraphFormatError("ids are not dense 0..V-1")
    return [pairs[i] for i in range(len(pairs))]


def transition_probabilities(g: Graph, i: int) -> list[tuple[int, float]]:
    """Next-step distribution ``p_ij = e_ij / sum_j e_ij``; empty for isolated nodes."""
    nbrs = g.adjacency[i]
    total = sum(w for _, w in nbrs)
    return [(j, w / total) for j, w in nbrs]


class TransitionSampler:
    """Cumulative-weight tables for O(log deg) neighbor sampling."""

    def __init__(self, g: Graph):
        self.num_nodes = g.num_nodes
        self._targets: list[list[int]] = []
        self._cumulative: list[list[float]] = []
        for nbrs in g.adjacency:
            self._targets.append([j for j, _ in nbrs])
            cum = list(itertools.accumulate(w for _, w in nbrs))
            total = cum[-1] if cum else 0.0
            self._cumulative.append([c / total for c in cum])

    def is_isolated(self, i: int) -> bool:
        return not self._targets[i]

    def step(self, i: int, u: float) -> int:
        """Map a uniform draw ``u`` in [0, 1) to the next node from ``i``."""
        cum = self._cumulative[i]
        k = bisect.bisect_right(cum, u)
        # guards u landing past a last entry that rounded below 1
        return self._targets[i][min(k, len(cum) - 1)]


def planted_partition(k: int, n_per: int, p_in: float, p_out: float,
                      seed: int) -> tuple[Graph, np.ndarray]:
    """Random graph with ``k`` blocks of ``n_per`` nodes.

    Each within-block pair is linked with probability ``p_in`` and each
    cross-block pair with ``p_out``, all with weight 1. Returns the graph
    and the block label of every node.
    """
    if k < 1 or n_per < 1:
        raise ValueError("k and n_per must be >= 1")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    n = k * n_per
    truth = np.repeat(np.arange(k), n_per)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.size)
    prob = np.where(truth[iu] == truth[ju], p_in, p_out)
    keep = draws < prob
    edges = [(int(u), int(v), 1.0) for u, v in zip(iu[keep], ju[keep])]
    return Graph.from_edges(n, edges), truth
