"""RMSprop and Adam over lists of parameter tensors."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, check_finite


class Optimizer:
    def __init__(self, params, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params: list[Tensor] = list(params)
        self.lr = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        if all(p.grad is None for p in self.params):
            raise RuntimeError("optimizer step without populated gradients")
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            check_finite(p.grad, f"{type(self).__name__} gradient")
            self._update(i, p)
        self.zero_grad()

    def _update(self, i: int, p: Tensor) -> None:
        raise NotImplementedError


class RMSprop(Optimizer):
    """v <- decay*v + (1-decay)*g^2;  w <- w - lr*g/sqrt(v + eps)."""

    def __init__(self, params, lr=0.01, decay=0.99, eps=1e-8):
        super().__init__(params, lr)
        self.decay = decay
        self.eps = eps
        self.square_avg = [np.zeros_like(p.value) for p in self.params]

    def _update(self, i, p):
        g = p.grad
        v = self.square_avg[i]
        v *= self.decay
        v += (1 - self.decay) * g * g
        p.value -= self.lr * g / np.sqrt(v + self.eps)


class Adam(Optimizer):
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(params, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = [0] * len(self.params)

    def _update(self, i, p):
        g = p.grad
        self.t[i] += 1
        t = self.t[i]
        self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
        self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
        m_hat = self.m[i] / (1 - self.beta1**t)
        v_hat = self.v[i] / (1 - self.beta2**t)
        p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
