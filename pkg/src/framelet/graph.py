"""A single-use reverse-mode tape for the network's handful of operations.

Every forward op appends a node holding its inputs, outputs and whatever it
needs for the vector-Jacobian product.  :meth:`ValueGraph.backward` walks the
nodes once in reverse and accumulates adjoints; parameters are addressed by
name so gradients come back as a ``{name: array}`` table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ShapeError, StateError
from .layers import conv2d, conv2d_grads, conv_windows, pool_wavelet, unpool_wavelet


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    ctx: Any = None


# op name -> (forward(attrs, *arrays) -> (outputs, ctx), vjp(attrs, ctx, grads) -> input grads)
OPS: dict[str, tuple[Callable, Callable]] = {}


def register(name: str):
    def deco(cls):
        OPS[name] = (cls.forward, cls.backward)
        return cls

    return deco


@register("conv")
class _Conv:
    @staticmethod
    def forward(attrs, x, w):
        windows = conv_windows(x, w.shape[-1])
        return (conv2d(x, w, windows),), (w, windows)

    @staticmethod
    def backward(attrs, ctx, grads):
        w, windows = ctx
        return conv2d_grads(grads[0], w, windows)


@register("bias_add")
class _BiasAdd:
    @staticmethod
    def forward(attrs, x, b):
        return (x + b[None, :, None, None],), None

    @staticmethod
    def backward(attrs, ctx, grads):
        g = grads[0]
        return g, g.sum(axis=(0, 2, 3))


@register("relu")
class _Relu:
    @staticmethod
    def forward(attrs, x):
        mask = x > 0
        return (np.where(mask, x, 0).astype(x.dtype, copy=False),), mask

    @staticmethod
    def backward(attrs, ctx, grads):
        return (np.where(ctx, grads[0], 0).astype(grads[0].dtype, copy=False),)


@register("wavelet_analysis")
class _Analysis:
    @staticmethod
    def forward(attrs, x):
        return pool_wavelet(x, attrs["bank"]), None

    @staticmethod
    def backward(attrs, ctx, grads):
        return (unpool_wavelet(grads[0], grads[1], attrs["bank"]),)


@register("wavelet_synthesis")
class _Synthesis:
    @staticmethod
    def forward(attrs, low, highs):
        return (unpool_wavelet(low, highs, attrs["bank"]),), None

    @staticmethod
    def backward(attrs, ctx, grads):
        return pool_wavelet(grads[0], attrs["bank"])


@register("concat")
class _Concat:
    @staticmethod
    def forward(attrs, *xs):
        return (np.concatenate(xs, axis=1),), [x.shape[1] for x in xs]

    @staticmethod
    def backward(attrs, ctx, grads):
        cuts = np.cumsum(ctx)[:-1]
        return tuple(np.split(grads[0], cuts, axis=1))


@register("add")
class _Add:
    @staticmethod
    def forward(attrs, a, b):
        return (a + b,), None

    @staticmethod
    def backward(attrs, ctx, grads):
        return grads[0], grads[0]


@dataclass
class ValueGraph:
    """Recorded computation; confined to one thread and used for one backward pass."""

    values: list[np.ndarray] = field(default_factory=list)
    nodes: list[Node] = field(default_factory=list)
    params: dict[str, int] = field(default_factory=dict)
    visited: list[int] = field(default_factory=list)
    consumed: bool = False
    output: int | None = None
    input_shape: tuple[int, ...] | None = None

    def _push(self, value: np.ndarray) -> int:
        self.values.append(value)
        return len(self.values) - 1

    def constant(self, value: np.ndarray) -> int:
        return self._push(value)

    def param(self, name: str, value: np.ndarray) -> int:
        if name not in self.params:
            self.params[name] = self._push(value)
        return self.params[name]

    def value(self, vid: int) -> np.ndarray:
        return self.values[vid]

    def apply(self, op: str, *inputs: int, **attrs):
        if self.consumed:
            raise StateError("graph already consumed by a backward pass")
        fwd, _ = OPS[op]
        outs, ctx = fwd(attrs, *(self.values[i] for i in inputs))
        ids = tuple(self._push(o) for o in outs)
        self.nodes.append(Node(op, inputs, ids, (attrs, ctx)))
        return ids if len(ids) > 1 else ids[0]

    def backward(self, output: int, output_grad: np.ndarray) -> dict[str, np.ndarray]:
        """Adjoints of every named parameter given the gradient at ``output``."""
        if not self.nodes:
            raise StateError("backward called before any forward op was recorded")
        if self.consumed:
            raise StateError("graph already consumed by a backward pass")
        out_val = self.values[output]
        if output_grad.shape != out_val.shape:
            raise ShapeError(f"output gradient {output_grad.shape} does not match output {out_val.shape}")
        adj: dict[int, np.ndarray] = {output: output_grad.astype(out_val.dtype, copy=False)}
        for idx in range(len(self.nodes) - 1, -1, -1):
            node = self.nodes[idx]
            self.visited.append(idx)
            if not any(o in adj for o in node.outputs):
                continue
            grads = tuple(
                adj.pop(o) if o in adj else np.zeros_like(self.values[o]) for o in node.outputs
            )
            attrs, ctx = node.ctx
            in_grads = OPS[node.op][1](attrs, ctx, grads)
            for i, g in zip(node.inputs, in_grads):
                adj[i] = adj[i] + g if i in adj else g
        self.consumed = True
        return {
            name: adj.get(vid, np.zeros_like(self.values[vid])) for name, vid in self.params.items()
        }
