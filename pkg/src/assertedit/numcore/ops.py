"""
Differentiable operations. Each op computes its forward value with numpy and
records a backward rule that accumulates into the gradients of its inputs.
Broadcasting is limited to adding a 1-D bias to every row.
"""
from __future__ import annotations

import numpy as np

from typing import List, Optional, Sequence

from ..errors import NumericError, ShapeError
from .tensor import Tape, Tensor, record

LOG_EPSILON: float = 1e-10


def _needs(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = Tensor(a.data @ b.data, requires_grad=_needs(a, b))

    def backward() -> None:
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ out.grad)

    return record(out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """
    Elementwise sum; `b` may also be a 1-D bias added to every row of `a`.
    """
    bias: bool = b.data.ndim == 1 and a.data.ndim == 2 and a.shape[1] == b.shape[0]
    if a.shape != b.shape and not bias:
        raise ShapeError("add", a.shape, b.shape)
    out = Tensor(a.data + b.data, requires_grad=_needs(a, b))

    def backward() -> None:
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad)
        if b.requires_grad:
            b.accumulate(out.grad.sum(axis=0) if bias else out.grad)

    return record(out, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("sub", a.shape, b.shape)
    out = Tensor(a.data - b.data, requires_grad=_needs(a, b))

    def backward() -> None:
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad)
        if b.requires_grad:
            b.accumulate(-out.grad)

    return record(out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    out = Tensor(a.data * b.data, requires_grad=_needs(a, b))

    def backward() -> None:
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad * b.data)
        if b.requires_grad:
            b.accumulate(out.grad * a.data)

    return record(out, backward)


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.data * factor, requires_grad=a.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            a.accumulate(out.grad * factor)

    return record(out, backward)


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """
    Sums equally shaped tensors in one node.
    """
    first = tensors[0]
    for t in tensors[1:]:
        if t.shape != first.shape:
            raise ShapeError("add_n", first.shape, t.shape)
    out = Tensor(np.sum([t.data for t in tensors], axis=0), requires_grad=_needs(*tensors), dtype=first.dtype)

    def backward() -> None:
        if out.grad is None:
            return
        for t in tensors:
            if t.requires_grad:
                t.accumulate(out.grad)

    return record(out, backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ndim: int = tensors[0].data.ndim
    for t in tensors[1:]:
        other_dims = [d for i, d in enumerate(t.shape) if i != axis % ndim]
        first_dims = [d for i, d in enumerate(tensors[0].shape) if i != axis % ndim]
        if t.data.ndim != ndim or other_dims != first_dims:
            raise ShapeError("concat", tensors[0].shape, t.shape)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), requires_grad=_needs(*tensors))

    def backward() -> None:
        if out.grad is None:
            return
        offsets = np.cumsum([0] + [t.shape[axis] for t in tensors])
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * ndim
                index[axis] = slice(start, stop)
                t.accumulate(out.grad[tuple(index)])

    return record(out, backward)


def narrow(a: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """
    Takes the slice [start, stop) along one axis.
    """
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(a.data[index], requires_grad=a.requires_grad)

    def backward() -> None:
        if out.grad is None:
            return
        grad = np.zeros_like(a.data)
        grad[index] = out.grad
        a.accumulate(grad)

    return record(out, backward)


def unstack(a: Tensor) -> List[Tensor]:
    """
    Splits a matrix into (1, n) row tensors sharing a single backward rule.
    """
    rows: List[Tensor] = [Tensor(a.data[i:i + 1], requires_grad=a.requires_grad) for i in range(a.shape[0])]

    def backward() -> None:
        grads = [row.grad for row in rows]
        if all(g is None for g in grads):
            return
        grad = np.zeros_like(a.data)
        for i, g in enumerate(grads):
            if g is not None:
                grad[i:i + 1] = g
        a.accumulate(grad)

    tape = Tape.current()
    if tape is not None and a.requires_grad:
        tape.record(backward)
    else:
        for row in rows:
            row.requires_grad = False
    return rows


def stack(rows: Sequence[Tensor]) -> Tensor:
    """
    Joins (1, n) row tensors into a (len(rows), n) matrix.
    """
    return concat(rows, axis=0)


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, requires_grad=a.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            a.accumulate(out.grad.T)

    return record(out, backward)


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data), requires_grad=a.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            a.accumulate(out.grad * (1.0 - out.data ** 2))

    return record(out, backward)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign to keep exp() from overflowing:
    x = a.data
    positive = x >= 0
    z = np.exp(-np.abs(x))
    value = np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype)
    out = Tensor(value, requires_grad=a.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            a.accumulate(out.grad * out.data * (1.0 - out.data))

    return record(out, backward)


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """
    Gathers rows of an embedding table.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
        raise ShapeError("embedding_lookup", table.shape, ids.shape)
    out = Tensor(table.data[ids], requires_grad=table.requires_grad)

    def backward() -> None:
        if out.grad is None:
            return
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, out.grad)
        table.accumulate(grad)

    return record(out, backward)


def lerp(gate: Tensor, a: Tensor, b: Tensor) -> Tensor:
    """
    Gated mixture gate * a + (1 - gate) * b with a (1, 1) gate.
    """
    if gate.shape != (1, 1):
        raise ShapeError("lerp gate", gate.shape, (1, 1))
    if a.shape != b.shape:
        raise ShapeError("lerp", a.shape, b.shape)
    g = gate.data[0, 0]
    out = Tensor(g * a.data + (1.0 - g) * b.data, requires_grad=_needs(gate, a, b))

    def backward() -> None:
        if out.grad is None:
            return
        if gate.requires_grad:
            gate.accumulate(np.sum(out.grad * (a.data - b.data)).reshape(1, 1))
        if a.requires_grad:
            a.accumulate(out.grad * g)
        if b.requires_grad:
            b.accumulate(out.grad * (1.0 - g))

    return record(out, backward)


def softmax_masked(logits: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over the last axis; masked-out positions get probability exactly zero.
    """
    x = logits.data
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if not mask.any(axis=-1).all():
        raise NumericError("softmax over a fully masked row")

    # Subtract the row maximum for stability:
    shifted = np.where(mask, x, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    p = (e / e.sum(axis=-1, keepdims=True)).astype(x.dtype)
    out = Tensor(p, requires_grad=logits.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            inner = np.sum(out.grad * p, axis=-1, keepdims=True)
            logits.accumulate(p * (out.grad - inner))

    return record(out, backward)


def cross_entropy_masked(dist: Tensor, target: int, mask: bool = True) -> Tensor:
    """
    -log dist[target] for a (1, V) distribution, clamped at LOG_EPSILON; zero when masked.
    """
    if not mask:
        return Tensor(np.zeros((1, 1)), dtype=dist.dtype)
    if dist.data.ndim != 2 or dist.shape[0] != 1 or not 0 <= target < dist.shape[1]:
        raise ShapeError("cross_entropy_masked", dist.shape, (1, target))

    p = dist.data[0, target]
    clamped: bool = p < LOG_EPSILON
    out = Tensor(np.array([[-np.log(max(p, LOG_EPSILON))]]), requires_grad=dist.requires_grad, dtype=dist.dtype)

    def backward() -> None:
        if out.grad is None or clamped:
            return
        grad = np.zeros_like(dist.data)
        grad[0, target] = -out.grad[0, 0] / p
        dist.accumulate(grad)

    return record(out, backward)


def dropout(t: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """
    Inverted dropout: kept values are scaled by 1 / (1 - rate); identity at inference.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return t

    keep = (rng.random(t.shape) >= rate) / (1.0 - rate)
    keep = keep.astype(t.dtype)
    out = Tensor(t.data * keep, requires_grad=t.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            t.accumulate(out.grad * keep)

    return record(out, backward)


def scatter_sum(weights: Tensor, ids: Sequence[int], width: int) -> Tensor:
    """
    Sums the (1, n) weights into a (1, width) row at the given column ids.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if weights.data.ndim != 2 or weights.shape[0] != 1 or weights.shape[1] != ids.size:
        raise ShapeError("scatter_sum", weights.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= width):
        raise ShapeError("scatter_sum", ids.shape, (1, width))
    value = np.zeros((1, width), dtype=weights.dtype)
    np.add.at(value[0], ids, weights.data[0])
    out = Tensor(value, requires_grad=weights.requires_grad)

    def backward() -> None:
        if out.grad is not None:
            weights.accumulate(out.grad[:, ids])

    return record(out, backward)


def pad_columns(a: Tensor, extra: int) -> Tensor:
    """
    Appends `extra` zero columns to a (1, n) row.
    """
    if extra == 0:
        return a
    return concat([a, Tensor(np.zeros((a.shape[0], extra)), dtype=a.dtype)], axis=1)
