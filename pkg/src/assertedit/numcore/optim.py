from __future__ import annotations

import numpy as np

from typing import List, Sequence

from ..errors import ShapeError
from .tensor import Tensor


def global_norm(params: Sequence[Tensor]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params if p.grad is not None)))


def clip_global_norm(params: Sequence[Tensor], threshold: float = 5.0) -> float:
    """
    Rescales all gradients together when their joint L2 norm exceeds the threshold.
    Returns the norm measured before clipping.
    """
    norm: float = global_norm(params)
    if norm > threshold:
        factor = threshold / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


class AdamState:
    """
    First and second moment estimates for a fixed list of parameters.
    """

    __slots__ = ("lr", "beta1", "beta2", "eps", "t", "m", "v")

    def __init__(self,
                 params: Sequence[Tensor],
                 lr: float = 0.001,
                 beta1: float = 0.9,
                 beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.lr: float = lr
        self.beta1: float = beta1
        self.beta2: float = beta2
        self.eps: float = eps
        self.t: int = 0
        self.m: List[np.ndarray] = [np.zeros_like(p.data) for p in params]
        self.v: List[np.ndarray] = [np.zeros_like(p.data) for p in params]


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """
    One bias-corrected Adam update; parameters without a gradient see a zero gradient.
    """
    if len(params) != len(state.m):
        raise ShapeError("adam_step", (len(params),), (len(state.m),))

    state.t += 1
    correction1: float = 1.0 - state.beta1 ** state.t
    correction2: float = 1.0 - state.beta2 ** state.t

    for p, m, v in zip(params, state.m, state.v):
        if m.shape != p.shape:
            raise ShapeError("adam_step", p.shape, m.shape)
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)

        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(grad)

        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
