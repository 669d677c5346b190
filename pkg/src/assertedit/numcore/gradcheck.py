from __future__ import annotations

import numpy as np

from typing import Callable, Optional, Sequence

from ..errors import NumericError
from .tensor import CHECK_DTYPE, Tape, Tensor

DEFAULT_STEP: float = 1e-5
# Smallest denominator of a relative error:
DEFAULT_FLOOR: float = 1e-4


def grad_check(computation: Callable[[], Tensor],
               params: Sequence[Tensor],
               seed: int = 0,
               h: float = DEFAULT_STEP,
               max_entries: Optional[int] = None,
               floor: float = DEFAULT_FLOOR) -> float:
    """
    Compares reverse-mode gradients of a scalar computation with central differences.

    Every entry of every parameter is probed unless `max_entries` caps the count per
    parameter, in which case the probed entries are drawn with `seed`. Returns the
    largest relative error seen.
    """
    for p in params:
        if p.dtype != CHECK_DTYPE:
            raise NumericError(f"gradient checks need {np.dtype(CHECK_DTYPE).name} parameters, got {p.dtype}")

    # Analytic gradients:
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = computation()
    tape.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    rng = np.random.default_rng(seed)
    worst: float = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        for i in entries:
            original = flat[i]
            flat[i] = original + h
            plus = computation().item()
            flat[i] = original - h
            minus = computation().item()
            flat[i] = original

            numeric = (plus - minus) / (2.0 * h)
            exact = grad.reshape(-1)[i]
            error = abs(exact - numeric) / max(abs(exact) + abs(numeric), floor)
            worst = max(worst, float(error))

    for p in params:
        p.zero_grad()
    return worst
