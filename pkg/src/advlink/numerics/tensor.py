"""Parameter tensors and finiteness guards."""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised by the op that produced a NaN or Inf."""


class ShapeError(ValueError):
    pass


def check_finite(arr: np.ndarray, where: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {where}")
    return arr


class Tensor:
    """Dense float64 array with a lazily allocated gradient buffer."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        value = np.array(value, dtype=np.float64)
        check_finite(value, "Tensor init")
        self.value = value
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.value.shape:
            raise ShapeError(f"gradient shape {g.shape} != value shape {self.value.shape}")
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"
