"""Community detection by fitting an HDP topic model to random walks on a graph."""
from .community import (Partition, assign, conductance, cut_ratio, internal_density,
                        modularity, node_posteriors)
from .corpus import Corpus, generate_corpus, load_corpus, sample_walk, save_corpus
from .graph import Graph, TransitionSampler, load_edge_list, planted_partition, transition_probabilities
from .hdp import (GlobalState, HdpConfig, LocalState, fit, global_step, init_global, load_model,
                  local_step, perplexity, save_model)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "GlobalState",
    "Graph",
    "HdpConfig",
    "LocalState",
    "Partition",
    "TransitionSampler",
    "assign",
    "conductance",
    "cut_ratio",
    "fit",
    "generate_corpus",
    "global_step",
    "init_global",
    "internal_density",
    "load_corpus",
    "load_edge_list",
    "load_model",
    "local_step",
    "modularity",
    "node_posteriors",
    "perplexity",
    "planted_partition",
    "sample_walk",
    "save_corpus",
    "save_model",
    "transition_probabilities",
]
