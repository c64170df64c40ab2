"""Short-term memory: spatial-temporal graph, edge weights, filtering, node classifier."""

from .classifier import (
    GcnHead,
    NodeLabels,
    gcn_classify,
    loss_sem,
    node_features,
    query_features,
    rasterize_labels,
)
from .filtering import AdjacencyParams, NormalizedAdjacency, edge_weights, gcf, normalize
from .graph import GraphConfig, STGraph, build_graph, node_index, node_position

__all__ = [
    "AdjacencyParams",
    "GcnHead",
    "GraphConfig",
    "NodeLabels",
    "NormalizedAdjacency",
    "STGraph",
    "build_graph",
    "edge_weights",
    "gcf",
    "gcn_classify",
    "loss_sem",
    "node_features",
    "node_index",
    "node_position",
    "normalize",
    "query_features",
    "rasterize_labels",
]
