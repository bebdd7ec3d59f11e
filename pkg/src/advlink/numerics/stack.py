"""Sequential layer stacks and parameter/FLOP accounting."""

from __future__ import annotations

import hashlib
from collections.abc import Iterable

import numpy as np

from .layers import Layer, layer_from_config
from .tensor import ShapeError, Tensor, check_finite


class LayerStack:
    """Ordered layers with a declared per-sample input shape.

    ``forward`` always caches activations, so ``backward`` can follow any
    forward pass. ``training`` only switches BatchNorm/Dropout behavior.
    """

    def __init__(self, layers: Iterable[Layer], input_shape, name: str = "stack"):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.name = name
        self._shapes = [self.input_shape]
        for layer in self.layers:
            self._shapes.append(tuple(layer.out_shape(self._shapes[-1])))
        self._has_forward = False

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self._shapes[-1]

    def initialize(self, rng: np.random.Generator) -> "LayerStack":
        for layer in self.layers:
            layer.initialize(rng)
        return self

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"{self.name}: input shape {x.shape[1:]} != declared {self.input_shape}"
            )
        check_finite(x, f"{self.name} input")
        for i, layer in enumerate(self.layers):
            x = layer.forward(x, training=training, rng=rng)
            check_finite(x, f"{self.name}[{i}] {layer.kind}.forward")
        self._has_forward = True
        return x

    __call__ = forward

    def backward(self, output_grad: np.ndarray, accumulate: bool = True) -> np.ndarray:
        """Backpropagate ``output_grad``; returns the gradient w.r.t. the input.

        With ``accumulate=False`` parameter gradients are not touched, which is
        how frozen networks (the victim decoder, the critic during a generator
        step) pass gradients through.
        """
        if not self._has_forward:
            raise RuntimeError(f"{self.name}: backward called without a cached forward pass")
        g = np.asarray(output_grad, dtype=np.float64)
        if g.shape[1:] != self.output_shape:
            raise ShapeError(f"{self.name}: output grad shape {g.shape[1:]} != {self.output_shape}")
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            g = layer.backward(g, accumulate=accumulate)
            check_finite(g, f"{self.name}[{i}] {layer.kind}.backward")
        return g

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [
            (f"{i}.{pname}", t)
            for i, layer in enumerate(self.layers)
            for pname, t in layer.params()
        ]

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def named_buffers(self) -> list[tuple[str, Tensor]]:
        return [
            (f"{i}.{bname}", t)
            for i, layer in enumerate(self.layers)
            for bname, t in layer.buffers()
        ]

    def zero_grad(self) -> None:
        for t in self.params():
            t.zero_grad()

    def architecture(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [{"kind": layer.kind, "config": layer.config()} for layer in self.layers],
        }

    @classmethod
    def from_architecture(cls, arch: dict) -> "LayerStack":
        layers = [layer_from_config(spec["kind"], spec["config"]) for spec in arch["layers"]]
        return cls(layers, arch["input_shape"], name=arch.get("name", "stack"))

    def checksum(self) -> str:
        """SHA-256 over every parameter and buffer, in order."""
        h = hashlib.sha256()
        for name, t in self.named_params() + self.named_buffers():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.value, dtype="<f8").tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        inner = ", ".join(repr(layer) for layer in self.layers)
        return f"LayerStack({self.name}: {inner})"


def count_params(stack: LayerStack) -> int:
    """Trainable parameter entries; BatchNorm running stats are excluded."""
    return sum(t.size for t in stack.params())


def count_flops(stack: LayerStack) -> int:
    """FLOPs of one single-sample forward pass.

    Convention: 2 per multiply-accumulate, 1 per bias add, 1 per element for
    activations (LogSoftmax included), 2 per element for inference BatchNorm,
    0 for Dropout and Reshape.
    """
    total = 0
    for layer, in_shape in zip(stack.layers, stack._shapes):
        total += layer.flops(in_shape)
    return total


def clip_weights(stack: LayerStack, c: float) -> None:
    if c <= 0:
        raise ValueError("clip bound must be positive")
    for t in stack.params():
        np.clip(t.value, -c, c, out=t.value)


def max_abs_weight(stack: LayerStack) -> float:
    params = stack.params()
    if not params:
        return 0.0
    return max(float(np.abs(t.value).max()) for t in params)
