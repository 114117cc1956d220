"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus an optional backward closure linking it to its
parents. ``backward()`` on a scalar walks the graph once in reverse topological
order; leaf gradients accumulate additively across calls until ``zero_grad``.
"""

from __future__ import annotations

import numpy as np

_FLOAT_TYPES = (np.float32, np.float64)

_grad_enabled = True


def grad_enabled() -> bool:
    return _grad_enabled


class no_grad:
    """Context manager that disables graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, exc_type, exc, tb):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.type not in _FLOAT_TYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype))

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        if self.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")

        order = _toposort(self)
        # Per-call gradient buffers; only leaves fold into persistent .grad,
        # so repeated backward calls accumulate instead of compounding.
        pending = {id(self): np.ones_like(self.data)}
        for node in order:
            grad_out = pending.pop(id(node), None)
            if grad_out is None:
                continue
            if not np.all(np.isfinite(grad_out)):
                raise FloatingPointError("non-finite gradient encountered")
            if node._backward is not None:
                for parent, contrib in zip(node._parents, node._backward(grad_out)):
                    if contrib is None:
                        continue
                    key = id(parent)
                    if key in pending:
                        pending[key] = pending[key] + contrib
                    else:
                        pending[key] = contrib
            if node.requires_grad:
                if node.grad is None:
                    node.grad = grad_out.copy()
                else:
                    node.grad = node.grad + grad_out

    def __repr__(self):
        flags = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flags})"

    # Arithmetic sugar is attached by ops.py to avoid an import cycle.


def _toposort(root: Tensor):
    """Nodes in reverse-topological (output-first) order, each visited once."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order


def make_node(data, parents, backward_fn) -> Tensor:
    """Wrap an op result, attaching the graph edge only when it can matter."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._backward is not None for p in parents):
        out.requires_grad = False
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))
