"""
Graph Convolutional Filtering
==============================
Learned edge weights, symmetric normalization, and one propagation step.

  A(i,j)   = σ((W1·x_i)ᵀ(W2·x_j))              stored edges only
  D̃(i,i)   = 1 + Σ_j A(i,j)                    self-loop included
  X^gcf_i  = Σ_j A(i,j)/√(D̃(i,i)·D̃(j,j))·x_j + x_i/D̃(i,i)

Everything is built from numerics primitives, so gradients flow to X, W1
and W2. The dense N×N matrix is never formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from errors import InputError, ShapeError
from numerics import ops
from numerics.tensor import ArrayLike, Tensor, as_tensor

from .graph import STGraph

logger = logging.getLogger("stgraph.filtering")

# σ underflows to 0 below a logit of about −745; normalize needs strictly positive weights
EDGE_WEIGHT_FLOOR = np.finfo(np.float64).tiny


@dataclass
class AdjacencyParams:
    """W1, W2: r×d projections applied before the edge inner product."""

    W1: Tensor
    W2: Tensor

    def __post_init__(self) -> None:
        self.W1, self.W2 = as_tensor(self.W1), as_tensor(self.W2)
        if self.W1.ndim != 2 or self.W1.shape != self.W2.shape:
            raise ShapeError(f"W1 {self.W1.shape} and W2 {self.W2.shape} must be equal-shaped r×d")

    @classmethod
    def identity(cls, d: int) -> "AdjacencyParams":
        """Constant W1 = W2 = I: the unweighted σ(x_iᵀx_j) similarity."""
        eye = np.eye(d, dtype=np.float64)
        return cls(W1=Tensor(eye), W2=Tensor(eye.copy()))

    @property
    def feature_dim(self) -> int:
        return self.W1.shape[1]


@dataclass
class NormalizedAdjacency:
    """D̃^{-1/2}(A+I)D̃^{-1/2} as off-diagonal CSR values plus the diagonal."""

    graph: STGraph
    values: Tensor     # per stored edge, storage order
    self_loop: Tensor  # 1 / D̃(i,i)
    degree: Tensor     # D̃(i,i)


def _check_features(graph: STGraph, X: Tensor, where: str) -> None:
    if X.ndim != 2 or X.shape[0] != graph.node_count:
        raise ShapeError(f"{where}: node features {X.shape} for a graph of {graph.node_count} nodes")


def edge_weights(graph: STGraph, X: ArrayLike, params: AdjacencyParams) -> Tensor:
    """Sigmoid edge weights for every stored edge, in CSR storage order.

    The smallest normal float64 is added to every weight, so weights stay
    positive when the sigmoid underflows.
    """
    X = as_tensor(X)
    _check_features(graph, X, "edge_weights")
    if params.feature_dim != X.shape[1]:
        raise ShapeError(f"edge_weights: W1 expects d={params.feature_dim}, features have d={X.shape[1]}")

    left = ops.matmul(X, ops.transpose(params.W1))
    right = ops.matmul(X, ops.transpose(params.W2))
    logits = ops.sum(
        ops.mul(ops.gather_rows(left, graph.rows), ops.gather_rows(right, graph.indices)),
        axis=1,
    )
    return ops.add(ops.sigmoid(logits), EDGE_WEIGHT_FLOOR)


def normalize(graph: STGraph, values: ArrayLike) -> NormalizedAdjacency:
    values = as_tensor(values)
    if values.shape != (graph.edge_count,):
        raise ShapeError(f"normalize: {values.shape} values for {graph.edge_count} edges")
    if graph.edge_count and np.min(values.data) <= 0:
        raise InputError("normalize: edge weights must be positive")

    degree = ops.add(ops.segment_sum(values, graph.rows, graph.node_count), 1.0)
    inv_sqrt = ops.power(degree, -0.5)
    scaled = ops.mul(
        ops.mul(values, ops.gather_rows(inv_sqrt, graph.rows)),
        ops.gather_rows(inv_sqrt, graph.indices),
    )
    return NormalizedAdjacency(
        graph=graph, values=scaled, self_loop=ops.power(degree, -1.0), degree=degree
    )


def gcf(norm: NormalizedAdjacency, X: ArrayLike) -> Tensor:
    """One graph convolutional filtering step over node features X (N×d)."""
    X = as_tensor(X)
    g = norm.graph
    _check_features(g, X, "gcf")
    neighbours = ops.spmm(norm.values, X, g.indptr, g.indices, g.rows)
    own = ops.mul(ops.reshape(norm.self_loop, (g.node_count, 1)), X)
    return ops.add(neighbours, own)
