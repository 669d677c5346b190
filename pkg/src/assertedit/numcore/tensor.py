from __future__ import annotations

import threading
import numpy as np

from typing import Callable, List, Optional, Tuple

DEFAULT_DTYPE = np.float32
CHECK_DTYPE = np.float64


class Tensor:
    """
    A dense row-major array with an optional gradient accumulator.
    """

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = "", dtype=None) -> None:
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data: np.ndarray = np.asarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad: bool = requires_grad
        self.name: str = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        label = f"'{self.name}', " if self.name else ""
        return f"Tensor({label}shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        """
        Adds to the gradient; gradients from several uses and several tapes sum up.
        """
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __add__(self, other: Tensor) -> Tensor:
        from .ops import add
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other: Tensor) -> Tensor:
        from .ops import mul
        return mul(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        from .ops import matmul
        return matmul(self, other)


class Tape:
    """
    Records backward rules in execution order. Each thread has its own stack of
    active tapes, so independent tapes may run in parallel threads.
    """

    __slots__ = ("_rules",)

    _local = threading.local()

    def __init__(self) -> None:
        self._rules: List[Callable[[], None]] = []

    def __enter__(self) -> Tape:
        Tape._stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._stack().pop()

    def __len__(self) -> int:
        return len(self._rules)

    @staticmethod
    def _stack() -> List[Tape]:
        if not hasattr(Tape._local, "stack"):
            Tape._local.stack = []
        return Tape._local.stack

    @staticmethod
    def current() -> Optional[Tape]:
        stack = Tape._stack()
        return stack[-1] if stack else None

    def record(self, rule: Callable[[], None]) -> None:
        self._rules.append(rule)

    def backward(self, loss: Tensor) -> None:
        """
        Seeds the scalar loss with gradient one and replays the rules in reverse.
        """
        loss.accumulate(np.ones_like(loss.data))
        for rule in reversed(self._rules):
            rule()
        self._rules.clear()


def record(out: Tensor, rule: Callable[[], None]) -> Tensor:
    """
    Registers the backward rule of `out` on the active tape, if gradients are needed.
    """
    tape = Tape.current()
    if tape is not None and out.requires_grad:
        tape.record(rule)
    else:
        out.requires_grad = False
    return out


def constant(data, like: Optional[Tensor] = None) -> Tensor:
    return Tensor(data, dtype=like.dtype if like is not None else None)
