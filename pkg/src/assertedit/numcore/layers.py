from __future__ import annotations

import numpy as np

from typing import List, NamedTuple, Optional, Tuple

from ..errors import ShapeError
from .ops import add, concat, matmul, mul, narrow, sigmoid, stack, tanh, unstack
from .tensor import Tensor


class LSTMWeights(NamedTuple):
    """
    Stacked gate weights in [input, forget, candidate, output] order.
    """
    w_x: Tensor  # (in, 4H)
    w_h: Tensor  # (H, 4H)
    b: Tensor    # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]


class BiLSTMOutput(NamedTuple):
    outputs: Tensor  # (T, 2H)
    final_h: Tensor  # (1, 2H)
    final_c: Tensor  # (1, 2H)


def _gates(z: Tensor, c_prev: Tensor, hidden: int) -> Tuple[Tensor, Tensor]:
    i = sigmoid(narrow(z, 0, hidden))
    f = sigmoid(narrow(z, hidden, 2 * hidden))
    g = tanh(narrow(z, 2 * hidden, 3 * hidden))
    o = sigmoid(narrow(z, 3 * hidden, 4 * hidden))

    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, weights: LSTMWeights) -> Tuple[Tensor, Tensor]:
    """
    One LSTM step: c_t = f * c_prev + i * g and h_t = o * tanh(c_t).
    """
    hidden: int = weights.hidden_size
    if x_t.shape != (1, weights.w_x.shape[0]):
        raise ShapeError("lstm_cell_step input", x_t.shape, (1, weights.w_x.shape[0]))
    if h_prev.shape != (1, hidden) or c_prev.shape != (1, hidden):
        raise ShapeError("lstm_cell_step state", h_prev.shape, (1, hidden))

    z = add(add(matmul(x_t, weights.w_x), matmul(h_prev, weights.w_h)), weights.b)
    return _gates(z, c_prev, hidden)


def zero_state(hidden: int, like: Tensor) -> Tensor:
    return Tensor(np.zeros((1, hidden)), dtype=like.dtype)


def lstm_run(xs: Tensor,
             weights: LSTMWeights,
             reverse: bool = False,
             h0: Optional[Tensor] = None,
             c0: Optional[Tensor] = None) -> Tuple[List[Tensor], Tensor, Tensor]:
    """
    Runs one direction over a (T, in) sequence. Outputs come back in sequence order.
    """
    if xs.data.ndim != 2 or xs.shape[0] == 0:
        raise ShapeError("lstm_run", xs.shape, (1, weights.w_x.shape[0]))
    if xs.shape[1] != weights.w_x.shape[0]:
        raise ShapeError("lstm_run", xs.shape, weights.w_x.shape)

    hidden: int = weights.hidden_size
    h = h0 if h0 is not None else zero_state(hidden, weights.w_h)
    c = c0 if c0 is not None else zero_state(hidden, weights.w_h)

    # Input projections for every step at once:
    projected: List[Tensor] = unstack(add(matmul(xs, weights.w_x), weights.b))
    order = range(len(projected) - 1, -1, -1) if reverse else range(len(projected))

    outputs: List[Optional[Tensor]] = [None] * len(projected)
    for t in order:
        z = add(projected[t], matmul(h, weights.w_h))
        h, c = _gates(z, c, hidden)
        outputs[t] = h
    return outputs, h, c


def bilstm_run(xs: Tensor, forward: LSTMWeights, backward: LSTMWeights) -> BiLSTMOutput:
    """
    Concatenates forward and backward states per position: output width is 2H.
    """
    if xs.data.ndim != 2 or xs.shape[0] == 0:
        raise ShapeError("bilstm_run", xs.shape, (1, forward.w_x.shape[0]))

    fwd_outputs, fwd_h, fwd_c = lstm_run(xs, forward)
    bwd_outputs, bwd_h, bwd_c = lstm_run(xs, backward, reverse=True)

    outputs = concat([stack(fwd_outputs), stack(bwd_outputs)], axis=1)
    return BiLSTMOutput(outputs, concat([fwd_h, bwd_h], axis=1), concat([fwd_c, bwd_c], axis=1))
