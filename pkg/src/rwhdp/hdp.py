"""Truncated stick-breaking HDP topic model trained by stochastic variational inference.

Shapes used throughout: ``K`` corpus-level topics, ``T`` document-level
topic pointers, ``V`` vocabulary size (graph nodes), ``N`` words in a document.

The corpus sticks ``v`` and document sticks ``pi`` are truncated by fixing the
last proportion to one, so ``sigma_K(v)`` and ``sigma_T(pi)`` absorb the
remaining mass.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import digamma, gammaln

from ._io import atomic_write
from .corpus import Corpus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HdpConfig:
    K: int = 100
    T: int = 10
    eta: float = 0.5
    gamma: float = 1.0
    alpha: float = 1.0
    batch_size: int = 2
    kappa: float = 0.7
    tau: float = 8.0
    epochs: int = 3
    max_local_iters: int = 100
    local_tol: float = 1e-4

    def __post_init__(self):
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")
        if self.T > self.K:
            raise ValueError(f"T ({self.T}) must not exceed K ({self.K})")
        for name in ("eta", "gamma", "alpha", "local_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.5 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0.5, 1]")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        for name in ("batch_size", "epochs", "max_local_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def replace(self, **changes) -> "HdpConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class GlobalState:
    """Variational parameters for topics (``lam``, K x V) and corpus sticks (``a``, ``b``)."""

    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    step_count: int = 0

    @property
    def K(self) -> int:
        return self.lam.shape[0]

    @property
    def V(self) -> int:
        return self.lam.shape[1]

    def topic_word(self) -> np.ndarray:
        """Point estimate of each topic's word distribution."""
        return self.lam / self.lam.sum(axis=1, keepdims=True)

    def copy(self) -> "GlobalState":
        return GlobalState(self.lam.copy(), self.a.copy(), self.b.copy(), self.step_count)


@dataclass
class LocalState:
    zeta: np.ndarray   # T x K, weights of each document pointer over corpus topics
    phi: np.ndarray    # N x T, weights of each word over document pointers
    gdoc1: np.ndarray  # T
    gdoc2: np.ndarray  # T
    iterations: int = 0


@dataclass
class DocStats:
    """Sufficient statistics of one document, restricted to the words it contains."""

    words: np.ndarray       # U distinct word ids
    word_topic: np.ndarray  # K x U expected counts
    m: np.ndarray           # K, expected number of pointers choosing topic k
    M: np.ndarray           # K, expected number of pointers choosing a topic after k


def _check_positive(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} must be strictly positive")
    return x


def stick_log_expectations(a, b) -> np.ndarray:
    """E[log sigma_k(v)] for ``v_k ~ Beta(a_k, b_k)`` with ``v_K`` fixed to 1."""
    return _stick_elog(_check_positive("a", a), _check_positive("b", b))


def _stick_elog(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    psi_sum = digamma(a + b)
    elog_v = digamma(a) - psi_sum
    elog_1mv = digamma(b) - psi_sum
    elog_v[-1] = 0.0
    out = elog_v.copy()
    out[1:] += np.cumsum(elog_1mv[:-1])
    return out


def stick_weights(v: np.ndarray) -> np.ndarray:
    """sigma_k(v) = v_k prod_{j<k}(1 - v_j), with the last proportion forced to 1."""
    v = np.array(v, dtype=float)
    v[-1] = 1.0
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - v[:-1])))
    return v * remaining


def dirichlet_log_expectation(lam) -> np.ndarray:
    """E[log theta] for ``theta ~ Dirichlet(lam)``; rows are independent Dirichlets."""
    lam = _check_positive("lambda", lam)
    if lam.ndim == 1:
        return digamma(lam) - digamma(lam.sum())
    return digamma(lam) - digamma(lam.sum(axis=1, keepdims=True))


def step_size(t: int, tau: float, kappa: float) -> float:
    """Robbins-Monro rate (tau + t)^-kappa, capped at 1."""
    base = tau + t
    if base <= 1.0:
        return 1.0
    return base ** -kappa


def init_global(config: HdpConfig, V: int, seed: int = 0) -> GlobalState:
    if V < 1:
        raise ValueError("vocabulary must have at least one word")
    rng = np.random.default_rng([seed, 0])
    lam = config.eta + rng.random((config.K, V))
    a = np.ones(config.K)
    b = np.full(config.K, config.gamma)
    return GlobalState(lam, a, b, 0)


class _Expectations:
    """Per-global-state quantities shared by every local step of a batch."""

    def __init__(self, state: GlobalState):
        self.lam = state.lam
        self.psi_rowsum = digamma(state.lam.sum(axis=1))
        self.elog_sticks = stick_log_expectations(state.a, state.b)

    def elog_beta(self, words: np.ndarray) -> np.ndarray:
        """K x len(words) slice of E[log beta]."""
        return digamma(self.lam[:, words]) - self.psi_rowsum[:, None]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    logits = logits - logits.max(axis=1, keepdims=True)
    out = np.exp(logits)
    out /= out.sum(axis=1, keepdims=True)
    return out


def _doc_sticks(phi: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    counts = phi.sum(axis=0)
    tail = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
    return 1.0 + counts, alpha + tail


def initial_phi(N: int, T: int) -> np.ndarray:
    """Split the walk into T contiguous segments, one per document pointer."""
    phi = np.zeros((N, T))
    phi[np.arange(N), (np.arange(N) * T) // N] = 1.0
    return phi


def _local(doc: np.ndarray, ex: _Expectations, config: HdpConfig,
           elog_beta: np.ndarray | None = None) -> LocalState:
    doc = np.asarray(doc, dtype=np.int64)
    if doc.size == 0:
        raise ValueError("document is empty")
    if elog_beta is None:
        elog_beta = ex.elog_beta(doc)
    # N x K
    elog_beta_doc = elog_beta.T
    phi = initial_phi(len(doc), config.T)
    gdoc1, gdoc2 = _doc_sticks(phi, config.alpha)
    it = 0
    while it < config.max_local_iters:
        it += 1
        zeta = _softmax_rows(phi.T @ elog_beta_doc + ex.elog_sticks)
        # gdoc1 >= 1 and gdoc2 >= alpha > 0, so the unchecked form is safe
        elog_pi = _stick_elog(gdoc1, gdoc2)
        new_phi = _softmax_rows(elog_beta_doc @ zeta.T + elog_pi)
        change = np.abs(new_phi - phi).sum() / phi.size
        phi = new_phi
        gdoc1, gdoc2 = _doc_sticks(phi, config.alpha)
        if change < config.local_tol:
            break
    return LocalState(zeta, phi, gdoc1, gdoc2, it)


def _stats(doc: np.ndarray, local: LocalState) -> DocStats:
    words, inverse = np.unique(doc, return_inverse=True)
    # N x K responsibility of each word occurrence for each corpus topic
    resp = local.phi @ local.zeta
    word_topic = np.zeros((len(words), resp.shape[1]))
    np.add.at(word_topic, inverse, resp)
    m = local.zeta.sum(axis=0)
    M = np.concatenate((np.cumsum(m[::-1])[::-1][1:], [0.0]))
    return DocStats(words, word_topic.T, m, M)


def local_step(doc, state: GlobalState, config: HdpConfig) -> tuple[LocalState, DocStats]:
    """Coordinate ascent on one document's variational parameters.

    Each sweep updates the pointer weights ``zeta``, then the word weights
    ``phi``, then the document sticks, until the mean absolute change in
    ``phi`` drops below ``config.local_tol`` or ``max_local_iters`` sweeps.
    ``phi`` starts from a split of the walk into ``T`` contiguous segments.
    """
    doc = np.asarray(doc, dtype=np.int64)
    local = _local(doc, _Expectations(state), config)
    return local, _stats(doc, local)


def global_step(state: GlobalState, batch: Sequence[DocStats], D: int,
                batch_size: int, config: HdpConfig, rho: float | None = None) -> GlobalState:
    """Blend the current state with the estimate implied by ``batch`` seen ``D/batch_size`` times."""
    if rho is None:
        rho = step_size(state.step_count, config.tau, config.kappa)
    scale = D / batch_size
    lam = (1.0 - rho) * state.lam + rho * config.eta
    m = np.zeros(state.K)
    M = np.zeros(state.K)
    for st in batch:
        lam[:, st.words] += (rho * scale) * st.word_topic
        m += st.m
        M += st.M
    a = (1.0 - rho) * state.a + rho * (1.0 + scale * m)
    b = (1.0 - rho) * state.b + rho * (config.gamma + scale * M)
    return GlobalState(lam, a, b, state.step_count + 1)


def fit(corpus: Corpus, config: HdpConfig, seed: int = 0, workers: int = 1,
        callback: Callable[[int, GlobalState], None] | None = None,
        state: GlobalState | None = None) -> GlobalState:
    """Run ``config.epochs`` passes of mini-batch SVI over a seeded shuffle of the corpus.

    ``callback(epoch, state)`` is invoked after every epoch (1-based).
    """
    D = len(corpus)
    if D < 1:
        raise ValueError("corpus is empty")
    if state is None:
        state = init_global(config, corpus.vocab_size, seed)
    elif state.V != corpus.vocab_size:
        raise ValueError("initial state vocabulary does not match corpus")
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in range(config.epochs):
            order = np.random.default_rng([seed, 1, epoch]).permutation(D)
            for start in range(0, D, config.batch_size):
                docs = [corpus.documents[i] for i in order[start:start + config.batch_size]]
                ex = _Expectations(state)

                def run(doc, ex=ex):
                    return _stats(doc, _local(doc, ex, config))

                stats = list(pool.map(run, docs)) if pool else [run(doc) for doc in docs]
                state = global_step(state, stats, D, len(docs), config)
            log.debug("epoch %d done after %d steps", epoch + 1, state.step_count)
            if callback is not None:
                callback(epoch + 1, state)
    finally:
        if pool is not None:
            pool.shutdown()
    return state


def infer(corpus: Corpus, state: GlobalState, config: HdpConfig) -> list[LocalState]:
    ex = _Expectations(state)
    return [_local(doc, ex, config) for doc in corpus.documents]


def doc_log_likelihood(doc, local: LocalState, topic_word: np.ndarray) -> float:
    """log p(w_d) under point estimates of the document sticks and topics."""
    pi_hat = stick_weights(local.gdoc1 / (local.gdoc1 + local.gdoc2))
    word_probs = (pi_hat @ local.zeta) @ topic_word[:, doc]
    return float(np.sum(np.log(word_probs)))


def perplexity(test: Corpus, state: GlobalState, config: HdpConfig) -> float:
    """exp(-sum_d log p(w_d) / sum_d N_d) over the test corpus."""
    if test.vocab_size != state.V:
        raise ValueError(f"test vocabulary {test.vocab_size} != model vocabulary {state.V}")
    ex = _Expectations(state)
    topic_word = state.topic_word()
    total = 0.0
    for doc in test.documents:
        total += doc_log_likelihood(doc, _local(doc, ex, config), topic_word)
    return float(np.exp(-total / test.num_tokens))


def _beta_kl_terms(prior_b: float, q1: np.ndarray, q2: np.ndarray) -> float:
    """E_q[log Beta(x; 1, prior_b)] - E_q[log q(x)] summed over sticks."""
    psi_sum = digamma(q1 + q2)
    elog_x = digamma(q1) - psi_sum
    elog_1mx = digamma(q2) - psi_sum
    prior = np.log(prior_b) + (prior_b - 1.0) * elog_1mx
    entropy_neg = (gammaln(q1 + q2) - gammaln(q1) - gammaln(q2)
                   + (q1 - 1.0) * elog_x + (q2 - 1.0) * elog_1mx)
    return float(np.sum(prior - entropy_neg))


def doc_elbo(doc, local: LocalState, state: GlobalState, config: HdpConfig) -> float:
    """Document-level evidence lower bound with the global state held fixed.

    Only terms that depend on the local parameters are included.
    """
    doc = np.asarray(doc, dtype=np.int64)
    elog_beta_doc = dirichlet_log_expectation(state.lam)[:, doc].T
    elog_sticks = stick_log_expectations(state.a, state.b)
    elog_pi = stick_log_expectations(local.gdoc1, local.gdoc2)
    zeta, phi = local.zeta, local.phi

    def xlogx(x):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    total = np.sum(zeta * elog_sticks) - np.sum(xlogx(zeta))
    total += np.sum(phi * elog_pi) - np.sum(xlogx(phi))
    total += np.sum(phi * (elog_beta_doc @ zeta.T))
    # the last document stick is fixed at 1 and carries no Beta factor
    total += _beta_kl_terms(config.alpha, local.gdoc1[:-1], local.gdoc2[:-1])
    return float(total)


MAGIC = b"RWHDPCK\n"
FORMAT_VERSION = 1


def save_model(path: str | os.PathLike, state: GlobalState, config: HdpConfig) -> None:
    """Write a checkpoint.

    Layout: 8-byte magic, uint32 format version, uint32 header length, a UTF-8
    JSON header (V, K, T, step_count, config), then ``lam`` (K*V), ``a`` (K)
    and ``b`` (K) as little-endian float64, row-major.
    """
    header = json.dumps({
        "V": state.V, "K": state.K, "T": config.T,
        "step_count": state.step_count, "config": config.to_dict(),
    }, sort_keys=True).encode("utf-8")
    with atomic_write(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for arr in (state.lam, state.a, state.b):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


class CheckpointError(ValueError):
    pass


def load_model(path: str | os.PathLike) -> tuple[GlobalState, HdpConfig]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a model checkpoint")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<II", blob, off)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    off += 8
    header = json.loads(blob[off:off + hlen].decode("utf-8"))
    off += hlen
    V, K = header["V"], header["K"]
    expected = 8 * (K * V + 2 * K)
    if len(blob) - off != expected:
        raise CheckpointError(f"{path}: truncated or oversized payload")
    data = np.frombuffer(blob, dtype="<f8", offset=off).astype(np.float64)
    lam = data[:K * V].reshape(K, V).copy()
    a = data[K * V:K * V + K].copy()
    b = data[K * V + K:].copy()
    config = HdpConfig(**header["config"])
    return GlobalState(lam, a, b, header["step_count"]), config
