"""Reverse-mode autodiff on numpy arrays, sized for this pipeline.

A Tensor wraps one ndarray. Ops (see ops.py) build an acyclic graph;
``backward(loss)`` runs the closures in reverse topological order exactly
once, accumulating ``.grad`` on every tensor that requires it. No
broadcasting zoo, no higher-order derivatives: exactly what the decoder,
losses and attack simulations need.
"""

from __future__ import annotations

import numpy as np


class GraphError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, op: str = "leaf"):
        if not isinstance(data, np.ndarray):
            arr = np.asarray(data)
            # numpy scalars keep their dtype; plain Python data defaults to f32
            data = arr if arr.dtype.kind == "f" and isinstance(data, np.generic) else arr.astype(np.float32)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.op = op
        if op == "leaf" and not np.all(np.isfinite(data)):
            raise GraphError("non-finite values rejected at graph boundary")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> np.ndarray:
        return self.data

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape}, dtype={self.data.dtype})"


def leaf(data, requires_grad: bool = False, dtype=None) -> Tensor:
    arr = np.asarray(data)
    if dtype is not None and arr.dtype != dtype:
        arr = arr.astype(dtype)
    return Tensor(arr, requires_grad=requires_grad)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Tensor, seed_grad=None) -> None:
    """Accumulate d(loss)/d(tensor) into .grad over the whole graph."""
    if not loss.requires_grad:
        raise GraphError("backward() on a graph with no differentiable leaves")
    if seed_grad is None:
        seed_grad = np.ones_like(loss.data)
    loss.grad = np.asarray(seed_grad, dtype=loss.data.dtype)
    for node in reversed(_toposort(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
