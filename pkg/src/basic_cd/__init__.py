"""Spectral community detection for a primary network aided by bipartite side networks."""

from .clustering import KMeansOptions, KMeansResult, ari, kmeans
from .errors import (
    BasicError,
    BoundsError,
    DomainError,
    NumericError,
    ParseError,
    ValidationError,
)
from .genmodel import ScenarioConfig, build_scenario
from .graph import (
    BipartiteAdjacency,
    NodeSubset,
    SymmetricAdjacency,
    c_core,
    density,
    largest_connected_component,
    load_edge_list,
    restrict,
    save_edge_list,
)
from .spectral import aggregate, basic_detect, score_detect, score_ratio, top_k_eigen

__version__ = "0.1.0"
