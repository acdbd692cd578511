"""Random-walk corpus: each walk is a document, each visited node a word."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from ._io import atomic_write
from .graph import Graph, TransitionSampler

DEFAULT_LENGTH = 100.0
DEFAULT_WALKS_PER_NODE = 5


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Corpus:
    documents: tuple[np.ndarray, ...]
    vocab_size: int

    def __post_init__(self):
        for d, doc in enumerate(self.documents):
            if len(doc) == 0:
                raise CorpusFormatError(f"document {d + 1} is empty")
            if doc.min() < 0 or doc.max() >= self.vocab_size:
                raise CorpusFormatError(
                    f"document {d + 1} has a token outside [0, {self.vocab_size})")

    def __len__(self):
        return len(self.documents)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.vocab_size == other.vocab_size
                and len(self.documents) == len(other.documents)
                and all(np.array_equal(a, b) for a, b in zip(self.documents, other.documents)))

    @property
    def num_tokens(self) -> int:
        return sum(len(doc) for doc in self.documents)

    def split_holdout(self, fraction: float = 0.1) -> tuple["Corpus", "Corpus"]:
        """Split off the last ``fraction`` of documents (by index) as a test set."""
        n_test = int(round(len(self.documents) * fraction))
        if n_test < 1 or n_test >= len(self.documents):
            raise ValueError(f"holdout fraction {fraction} leaves an empty split "
                             f"for {len(self.documents)} documents")
        cut = len(self.documents) - n_test
        return (Corpus(self.documents[:cut], self.vocab_size),
                Corpus(self.documents[cut:], self.vocab_size))


def walk_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for walk ``index`` under ``seed``."""
    return np.random.default_rng([seed, index])


def _walk(sampler: TransitionSampler, expected_length: float,
          rng: np.random.Generator) -> np.ndarray:
    start = int(rng.integers(sampler.num_nodes))
    target = max(1, int(rng.poisson(expected_length)))
    draws = rng.random(target - 1)
    tokens = [start]
    node = start
    for u in draws:
        if sampler.is_isolated(node):
            break
        node = sampler.step(node, u)
        tokens.append(node)
    return np.array(tokens, dtype=np.int64)


def sample_walk(g: Graph, expected_length: float, rng: np.random.Generator,
                sampler: TransitionSampler | None = None) -> np.ndarray:
    """One walk: uniform start, Poisson(L) length clamped to >= 1.

    The walk stops early if it reaches a node with no neighbors.
    """
    if g.num_nodes < 1:
        raise ValueError("graph has no nodes")
    if not expected_length > 0:
        raise ValueError("expected_length must be positive")
    return _walk(sampler or TransitionSampler(g), expected_length, rng)


def _walk_chunk(args):
    sampler, expected_length, seed, indices = args
    return [_walk(sampler, expected_length, walk_rng(seed, d)) for d in indices]


def generate_corpus(g: Graph, num_walks: int, expected_length: float = DEFAULT_LENGTH,
                    seed: int = 0, workers: int = 1) -> Corpus:
    """Generate ``num_walks`` independent walks.

    Walk ``d`` draws from its own stream seeded by ``(seed, d)``, so the
    result does not depend on ``workers``.
    """
    if num_walks < 1:
        raise ValueError(f"num_walks must be >= 1, got {num_walks}")
    if g.num_nodes < 1:
        raise ValueError("graph has no nodes")
    if not expected_length > 0:
        raise ValueError("expected_length must be positive")
    sampler = TransitionSampler(g)
    if workers <= 1 or num_walks < 2 * workers:
        docs = _walk_chunk((sampler, expected_length, seed, range(num_walks)))
    else:
        bounds = np.linspace(0, num_walks, workers + 1).astype(int)
        jobs = [(sampler, expected_length, seed, range(lo, hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            docs = [doc for chunk in pool.map(_walk_chunk, jobs) for doc in chunk]
    return Corpus(tuple(docs), g.num_nodes)


def resolve_num_walks(walks: str | int, num_nodes: int) -> int:
    """Accept an absolute count or an ``"Nx"`` multiple of the node count."""
    if isinstance(walks, int):
        return walks
    text = str(walks).strip().lower()
    if text.endswith("x"):
        return int(round(float(text[:-1]) * num_nodes))
    return int(text)


def write_corpus(corpus: Corpus, dest: IO[str]) -> None:
    for doc in corpus.documents:
        dest.write(" ".join(map(str, doc.tolist())))
        dest.write("\n")


def read_corpus(source: IO[str] | Iterable[str], vocab_size: int | None = None) -> Corpus:
    """Parse one walk per line. Without ``vocab_size`` it is inferred as max id + 1."""
    docs = []
    for d, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            raise CorpusFormatError(f"document {d} is empty")
        try:
            tokens = np.array([int(t) for t in line.split()], dtype=np.int64)
        except ValueError:
            raise CorpusFormatError(f"document {d} has a non-integer token") from None
        if vocab_size is not None and (tokens.min() < 0 or tokens.max() >= vocab_size):
            raise CorpusFormatError(
                f"document {d} has a token outside [0, {vocab_size})")
        docs.append(tokens)
    if vocab_size is None:
        vocab_size = max((int(doc.max()) for doc in docs), default=-1) + 1
    return Corpus(tuple(docs), vocab_size)


def save_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    with atomic_write(path) as fh:
        write_corpus(corpus, fh)


def load_corpus(path: str | os.PathLike, vocab_size: int | None = None) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return read_corpus(fh, vocab_size)


def from_lists(documents: Sequence[Sequence[int]], vocab_size: int) -> Corpus:
    return Corpus(tuple(np.asarray(doc, dtype=np.int64) for doc in documents), vocab_size)
