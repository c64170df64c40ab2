"""
Tensor & DiffGraph — Tape-Based Reverse-Mode Differentiation
=============================================================
A Tensor is a float64 numpy array plus (optionally) a handle into a DiffGraph.
The DiffGraph is an ordered tape: every primitive applied to a tracked tensor
appends one entry (function, saved context, input node ids, output node id).

Lifecycle:
  graph = DiffGraph()
  w = graph.parameter("W", np.zeros((3, 3)))   # registered leaf
  loss = ops.sum(ops.mul(w, w))                  # recorded on the tape
  grads = backward(graph, loss)                  # {"W": dL/dW}

Operations on tensors that carry no graph run eagerly and record nothing,
which is what gradient checking uses for its perturbed forward passes.

A DiffGraph is confined to one thread for its forward + backward lifetime.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from errors import UsageError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


# ── Tensor ──────────────────────────────────────────────────────────────


class Tensor:
    """A float64 array, tracked when `graph` is set."""

    __slots__ = ("data", "graph", "node_id")

    def __init__(
        self,
        data: Any,
        graph: Optional["DiffGraph"] = None,
        node_id: Optional[int] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.graph = graph
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.graph is not None

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        where = f", node={self.node_id}" if self.tracked else ""
        return f"Tensor(shape={self.shape}{where})"

    # Operator sugar; the primitives live in numerics.ops.

    def __add__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        from numerics import ops

        return ops.mul(other, self)

    def __neg__(self) -> "Tensor":
        from numerics import ops

        return ops.mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from numerics import ops

        return ops.matmul(self, other)


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap a constant; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


# ── Primitive protocol ──────────────────────────────────────────────────


class Context:
    """Scratch space a primitive fills during forward and reads in backward."""

    def __init__(self) -> None:
        self.saved: tuple[Any, ...] = ()

    def save_for_backward(self, *values: Any) -> None:
        self.saved = values


class Function:
    """Base class for differentiable primitives.

    Subclasses implement `forward(ctx, *arrays, **kwargs) -> array` and
    `backward(ctx, grad) -> tuple` with one entry (array or None) per input.
    """

    @classmethod
    def apply(cls, *inputs: ArrayLike, **kwargs: Any) -> Tensor:
        tensors = [as_tensor(x) for x in inputs]
        graph = _shared_graph(tensors)
        ctx = Context()
        out = np.asarray(
            cls.forward(ctx, *[t.data for t in tensors], **kwargs), dtype=np.float64
        )
        if graph is None:
            return Tensor(out)
        return graph._record(cls, ctx, tensors, out, kwargs)

    @staticmethod
    def forward(ctx: Context, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


def _shared_graph(tensors: Sequence[Tensor]) -> Optional["DiffGraph"]:
    graph = None
    for t in tensors:
        if t.graph is None:
            continue
        if graph is None:
            graph = t.graph
        elif t.graph is not graph:
            raise UsageError("cannot combine tensors recorded on different graphs")
    return graph


# ── DiffGraph ───────────────────────────────────────────────────────────


@dataclass
class TapeEntry:
    function: type[Function]
    ctx: Context
    inputs: tuple[Optional[int], ...]
    constants: tuple[Optional[np.ndarray], ...]
    output: int
    kwargs: dict[str, Any] = field(default_factory=dict)


class DiffGraph:
    """Ordered record of the primitives applied during one forward pass."""

    def __init__(self) -> None:
        self._tape: list[TapeEntry] = []
        self._params: dict[str, int] = {}
        self._leaves: dict[int, np.ndarray] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._tape)

    @property
    def parameter_names(self) -> list[str]:
        return list(self._params)

    def parameter(self, name: str, value: ArrayLike) -> Tensor:
        """Register a trainable leaf. Every registered name gets a gradient."""
        if name in self._params:
            raise UsageError(f"parameter {name!r} registered twice")
        data = np.array(as_tensor(value).data, dtype=np.float64, copy=True)
        node_id = self._new_id()
        self._params[name] = node_id
        self._leaves[node_id] = data
        return Tensor(data, graph=self, node_id=node_id)

    def _new_id(self) -> int:
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def _record(
        self,
        function: type[Function],
        ctx: Context,
        inputs: Sequence[Tensor],
        out: np.ndarray,
        kwargs: dict[str, Any],
    ) -> Tensor:
        node_id = self._new_id()
        self._tape.append(
            TapeEntry(
                function=function,
                ctx=ctx,
                inputs=tuple(t.node_id if t.tracked else None for t in inputs),
                constants=tuple(None if t.tracked else t.data for t in inputs),
                output=node_id,
                kwargs=kwargs,
            )
        )
        return Tensor(out, graph=self, node_id=node_id)

    def replay(self, node: Tensor) -> np.ndarray:
        """Re-run the recorded forward pass from the stored leaves; return `node`'s value."""
        if node.graph is not self:
            raise UsageError("node was not recorded on this graph")
        values: dict[int, np.ndarray] = dict(self._leaves)
        for entry in self._tape:
            args = [
                values[i] if i is not None else c
                for i, c in zip(entry.inputs, entry.constants)
            ]
            values[entry.output] = np.asarray(
                entry.function.forward(Context(), *args, **entry.kwargs),
                dtype=np.float64,
            )
            if entry.output == node.node_id:
                break
        return values[node.node_id]


# ── Reverse pass ────────────────────────────────────────────────────────


def backward(graph: DiffGraph, loss: Tensor) -> dict[str, np.ndarray]:
    """Gradient of a scalar `loss` w.r.t. every registered parameter.

    Parameters the loss does not depend on receive exact zeros.
    """
    if loss.data.ndim != 0:
        raise UsageError(f"loss must be a scalar, got shape {loss.shape}")
    if loss.graph is None:
        return {name: np.zeros_like(graph._leaves[i]) for name, i in graph._params.items()}
    if loss.graph is not graph:
        raise UsageError("loss was not recorded on this graph")

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones((), dtype=np.float64)}
    for entry in reversed(graph._tape):
        grad = grads.pop(entry.output, None)
        if grad is None:
            continue
        input_grads = entry.function.backward(entry.ctx, grad)
        for node_id, g in zip(entry.inputs, input_grads):
            if node_id is None or g is None:
                continue
            if node_id in grads:
                grads[node_id] = grads[node_id] + g
            else:
                grads[node_id] = np.array(g, dtype=np.float64)

    return {
        name: grads[i].reshape(graph._leaves[i].shape) if i in grads else np.zeros_like(graph._leaves[i])
        for name, i in graph._params.items()
    }
