"""Node-to-community assignment and partition quality scores.

Quality metrics count edges, not weights, and ignore self-loops: ``m_S`` is the
number of node pairs inside ``S`` joined by an edge and ``c_S`` the number
of pairs with exactly one end in ``S``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .graph import Graph
from .hdp import GlobalState, stick_weights


def node_posteriors(state: GlobalState) -> np.ndarray:
    """V x K matrix of p(z=k | w_i) proportional to beta_hat[k, i] * sigma_k(v_hat)."""
    beta_hat = state.topic_word()
    sigma = stick_weights(state.a / (state.a + state.b))
    scores = beta_hat.T * sigma
    return scores / scores.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray

    @property
    def num_communities(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.num_communities)]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


def relabel(raw: Sequence[int]) -> Partition:
    """Renumber arbitrary community ids densely by first appearance."""
    mapping: dict[int, int] = {}
    labels = np.array([mapping.setdefault(int(x), len(mapping)) for x in raw], dtype=np.int64)
    return Partition(labels)


def assign(posterior: np.ndarray) -> Partition:
    # np.argmax returns the first maximum, i.e. the smallest topic index on ties
    return relabel(np.argmax(posterior, axis=1))


def _as_mask(g: Graph, S: Iterable[int]) -> np.ndarray:
    mask = np.zeros(g.num_nodes, dtype=bool)
    mask[np.fromiter(S, dtype=np.int64)] = True
    return mask


def _counts(g: Graph, mask: np.ndarray) -> tuple[int, int]:
    """(m_S, c_S) for the node set given by ``mask``."""
    inside = 0
    boundary = 0
    for u in np.flatnonzero(mask):
        for v, _ in g.adjacency[u]:
            if v == u:
                continue
            if mask[v]:
                inside += 1
            else:
                boundary += 1
    return inside // 2, boundary


def internal_density(g: Graph, S: Iterable[int]) -> float:
    mask = _as_mask(g, S)
    n_s = int(mask.sum())
    if n_s == 0:
        raise ValueError("node set is empty")
    if n_s == 1:
        return 0.0
    m_s, _ = _counts(g, mask)
    return 2.0 * m_s / (n_s * (n_s - 1))


def cut_ratio(g: Graph, S: Iterable[int]) -> float:
    mask = _as_mask(g, S)
    n_s = int(mask.sum())
    if n_s == 0:
        raise ValueError("node set is empty")
    if n_s == g.num_nodes:
        raise ValueError("cut ratio is undefined for the full node set")
    _, c_s = _counts(g, mask)
    return c_s / (n_s * (g.num_nodes - n_s))


def conductance(g: Graph, S: Iterable[int]) -> float:
    mask = _as_mask(g, S)
    if not mask.any():
        raise ValueError("node set is empty")
    m_s, c_s = _counts(g, mask)
    if m_s == 0 and c_s == 0:
        return 0.0
    return c_s / (2.0 * m_s + c_s)


def modularity(g: Graph, partition: Partition | Sequence[int]) -> float:
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    if len(labels) != g.num_nodes:
        raise ValueError("partition does not cover every node")
    m = 0
    inside: dict[int, int] = {}
    ends: dict[int, int] = {}
    for u, v, _ in g.edges():
        if u == v:
            continue
        m += 1
        lu, lv = int(labels[u]), int(labels[v])
        ends[lu] = ends.get(lu, 0) + 1
        ends[lv] = ends.get(lv, 0) + 1
        if lu == lv:
            inside[lu] = inside.get(lu, 0) + 1
    if m == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    return sum(inside.get(c, 0) / m - (ends[c] / (2.0 * m)) ** 2 for c in sorted(ends))


@dataclass(frozen=True)
class CommunityScore:
    community: int
    size: int
    density: float
    cut_ratio: float
    conductance: float


def score_partition(g: Graph, partition: Partition) -> tuple[float, list[CommunityScore]]:
    rows = []
    for c, members in enumerate(partition.members()):
        cr = cut_ratio(g, members) if len(members) < g.num_nodes else float("nan")
        rows.append(CommunityScore(c, len(members), internal_density(g, members), cr,
                                   conductance(g, members)))
    return modularity(g, partition), rows


def _fmt(x: float) -> str:
    return "nan" if np.isnan(x) else f"{x:.10f}"


def format_report(g: Graph, partition: Partition) -> str:
    """Plain-text score report: global lines, per-metric quartiles, then one row per community."""
    q, rows = score_partition(g, partition)
    lines = [
        f"nodes {g.num_nodes}",
        f"edges {g.num_edges}",
        f"communities {partition.num_communities}",
        f"modularity {_fmt(q)}",
    ]
    for name in ("density", "cut_ratio", "conductance"):
        values = np.array([getattr(r, name) for r in rows])
        values = values[~np.isnan(values)]
        if values.size:
            qs = np.percentile(values, [0, 25, 50, 75, 100])
            lines.append(f"summary {name} min={_fmt(qs[0])} q1={_fmt(qs[1])} median={_fmt(qs[2])} "
                         f"q3={_fmt(qs[3])} max={_fmt(qs[4])}")
        else:
            lines.append(f"summary {name} n/a")
    lines.append("community size density cut_ratio conductance")
    for r in rows:
        lines.append(f"{r.community} {r.size} {_fmt(r.density)} {_fmt(r.cut_ratio)} "
                     f"{_fmt(r.conductance)}")
    return "\n".join(lines) + "\n"


def write_partition(labels: Sequence[str], partition: Partition, dest: IO[str]) -> None:
    for label, c in zip(labels, partition.labels.tolist()):
        dest.write(f"{label} {c}\n")


class PartitionFormatError(ValueError):
    pass


def read_partition(source: IO[str] | Iterable[str], labels: Sequence[str]) -> Partition:
    """Read ``node_label community_id`` lines against the graph's node labels."""
    index = {label: i for i, label in enumerate(labels)}
    raw = [None] * len(labels)
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PartitionFormatError(f"line {lineno}: expected 'node_label community_id'")
        if parts[0] not in index:
            raise PartitionFormatError(f"line {lineno}: unknown node {parts[0]!r}")
        try:
            raw[index[parts[0]]] = int(parts[1])
        except ValueError:
            raise PartitionFormatError(f"line {lineno}: bad community id {parts[1]!r}") from None
    missing = [labels[i] for i, c in enumerate(raw) if c is None]
    if missing:
        raise PartitionFormatError(f"{len(missing)} nodes have no community, e.g. {missing[0]!r}")
    return relabel(raw)
