"""Layer kinds with explicit forward/backward passes.

Activations are plain float64 arrays with the batch on axis 0. Per-sample
shapes exclude the batch axis. Every layer caches what its backward pass
needs during ``forward`` and raises if ``backward`` is called without it.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import NonFiniteError, ShapeError, Tensor, check_finite


class Layer:
    kind: str = "Layer"

    def __init__(self):
        self._cache = None

    def params(self) -> list[tuple[str, Tensor]]:
        return []

    def buffers(self) -> list[tuple[str, Tensor]]:
        """Non-trainable state that must survive a checkpoint round trip."""
        return []

    def config(self) -> dict:
        return {}

    def initialize(self, rng: np.random.Generator) -> None:
        pass

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(in_shape)

    def flops(self, in_shape: tuple[int, ...]) -> int:
        return 0

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray, accumulate: bool = True) -> np.ndarray:
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}.backward called without a cached forward pass")
        return self._cache

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{self.kind}({args})"


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


class Linear(Layer):
    kind = "Linear"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((out_features, in_features)))
        self.bias = Tensor(np.zeros(out_features))

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def initialize(self, rng):
        bound = 1.0 / math.sqrt(self.in_features)
        self.weight.value = _uniform(rng, bound, self.weight.shape)
        self.bias.value = _uniform(rng, bound, self.bias.shape)

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.in_features,):
            raise ShapeError(f"Linear expects ({self.in_features},), got {tuple(in_shape)}")
        return (self.out_features,)

    def flops(self, in_shape):
        return 2 * self.in_features * self.out_features + self.out_features

    def forward(self, x, training=False, rng=None):
        self._cache = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, gy, accumulate=True):
        x = self._cached()
        if accumulate:
            self.weight.accumulate(gy.T @ x)
            self.bias.accumulate(gy.sum(axis=0))
        return gy @ self.weight.value


class Conv1d(Layer):
    """Stride-1 convolution over (channels, length) with symmetric zero padding."""

    kind = "Conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, padding: int = 0):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.weight = Tensor(np.zeros((out_channels, in_channels, kernel_size)))
        self.bias = Tensor(np.zeros(out_channels))

    def config(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "padding": self.padding,
        }

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def initialize(self, rng):
        bound = 1.0 / math.sqrt(self.in_channels * self.kernel_size)
        self.weight.value = _uniform(rng, bound, self.weight.shape)
        self.bias.value = _uniform(rng, bound, self.bias.shape)

    def _out_len(self, length):
        return length + 2 * self.padding - self.kernel_size + 1

    def out_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[0] != self.in_channels:
            raise ShapeError(f"Conv1d expects ({self.in_channels}, L), got {tuple(in_shape)}")
        out_len = self._out_len(in_shape[1])
        if out_len < 1:
            raise ShapeError("Conv1d output length would be < 1")
        return (self.out_channels, out_len)

    def flops(self, in_shape):
        _, out_len = self.out_shape(in_shape)
        macs = self.in_channels * self.kernel_size * self.out_channels * out_len
        return 2 * macs + self.out_channels * out_len

    def forward(self, x, training=False, rng=None):
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        cols = sliding_window_view(xp, self.kernel_size, axis=2)  # (B, C, L_out, K)
        self._cache = (cols, x.shape)
        y = np.einsum("bclk,ock->bol", cols, self.weight.value, optimize=True)
        return y + self.bias.value[None, :, None]

    def backward(self, gy, accumulate=True):
        cols, x_shape = self._cached()
        if accumulate:
            self.weight.accumulate(np.einsum("bclk,bol->ock", cols, gy, optimize=True))
            self.bias.accumulate(gy.sum(axis=(0, 2)))
        gcols = np.einsum("ock,bol->bclk", self.weight.value, gy, optimize=True)
        batch, channels, length = x_shape
        out_len = gy.shape[2]
        gxp = np.zeros((batch, channels, length + 2 * self.padding))
        for k in range(self.kernel_size):
            gxp[:, :, k:k + out_len] += gcols[:, :, :, k]
        if self.padding:
            return gxp[:, :, self.padding:self.padding + length]
        return gxp


class ConvTranspose1d(Layer):
    """Stride-1 transposed convolution; output length is L + kernel - 1."""

    kind = "ConvTranspose1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.weight = Tensor(np.zeros((in_channels, out_channels, kernel_size)))
        self.bias = Tensor(np.zeros(out_channels))

    def config(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
        }

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def initialize(self, rng):
        bound = 1.0 / math.sqrt(self.out_channels * self.kernel_size)
        self.weight.value = _uniform(rng, bound, self.weight.shape)
        self.bias.value = _uniform(rng, bound, self.bias.shape)

    def out_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[0] != self.in_channels:
            raise ShapeError(
                f"ConvTranspose1d expects ({self.in_channels}, L), got {tuple(in_shape)}"
            )
        return (self.out_channels, in_shape[1] + self.kernel_size - 1)

    def flops(self, in_shape):
        out_ch, out_len = self.out_shape(in_shape)
        macs = self.in_channels * out_ch * self.kernel_size * in_shape[1]
        return 2 * macs + out_ch * out_len

    def forward(self, x, training=False, rng=None):
        self._cache = x
        batch, _, length = x.shape
        contrib = np.einsum("bci,cok->boik", x, self.weight.value, optimize=True)
        y = np.zeros((batch, self.out_channels, length + self.kernel_size - 1))
        for k in range(self.kernel_size):
            y[:, :, k:k + length] += contrib[:, :, :, k]
        return y + self.bias.value[None, :, None]

    def backward(self, gy, accumulate=True):
        x = self._cached()
        length = x.shape[2]
        # windows[b, o, i, k] == gy[b, o, i + k]
        windows = sliding_window_view(gy, length, axis=2).transpose(0, 1, 3, 2)
        if accumulate:
            self.weight.accumulate(np.einsum("bci,boik->cok", x, windows, optimize=True))
            self.bias.accumulate(gy.sum(axis=(0, 2)))
        return np.einsum("boik,cok->bci", windows, self.weight.value, optimize=True)


class BatchNorm1d(Layer):
    """Per-feature batch normalization for (B, F) inputs.

    Running statistics use momentum 0.1 and the unbiased batch variance;
    normalization uses the biased one.
    """

    kind = "BatchNorm1d"

    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.weight = Tensor(np.ones(num_features))
        self.bias = Tensor(np.zeros(num_features))
        self.running_mean = Tensor(np.zeros(num_features))
        self.running_var = Tensor(np.ones(num_features))

    def config(self):
        return {"num_features": self.num_features, "eps": self.eps, "momentum": self.momentum}

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def initialize(self, rng):
        self.weight.value = np.ones(self.num_features)
        self.bias.value = np.zeros(self.num_features)
        self.running_mean.value = np.zeros(self.num_features)
        self.running_var.value = np.ones(self.num_features)

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.num_features,):
            raise ShapeError(f"BatchNorm1d expects ({self.num_features},), got {tuple(in_shape)}")
        return (self.num_features,)

    def flops(self, in_shape):
        # folded into one scale and one shift per element at inference
        return 2 * self.num_features

    def normalize(self, x: np.ndarray, training: bool) -> np.ndarray:
        """Return the pre-affine normalized input (no state update)."""
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
        else:
            mean = self.running_mean.value
            var = self.running_var.value
        return (x - mean) / np.sqrt(var + self.eps)

    def forward(self, x, training=False, rng=None):
        gamma = self.weight.value
        if training:
            batch = x.shape[0]
            if batch < 2:
                raise ShapeError("BatchNorm1d needs batch >= 2 in training mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            m = self.momentum
            self.running_mean.value = (1 - m) * self.running_mean.value + m * mean
            self.running_var.value = (1 - m) * self.running_var.value + m * var * batch / (batch - 1)
            self._cache = (True, xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var.value + self.eps)
            xhat = (x - self.running_mean.value) * inv_std
            self._cache = (False, xhat, inv_std)
        return gamma * xhat + self.bias.value

    def backward(self, gy, accumulate=True):
        training, xhat, inv_std = self._cached()
        if accumulate:
            self.weight.accumulate((gy * xhat).sum(axis=0))
            self.bias.accumulate(gy.sum(axis=0))
        gxhat = gy * self.weight.value
        if not training:
            return gxhat * inv_std
        return inv_std * (
            gxhat - gxhat.mean(axis=0) - xhat * (gxhat * xhat).mean(axis=0)
        )


class ReLU(Layer):
    kind = "ReLU"

    def flops(self, in_shape):
        return math.prod(in_shape)

    def forward(self, x, training=False, rng=None):
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, gy, accumulate=True):
        return gy * self._cached()


class LeakyReLU(Layer):
    kind = "LeakyReLU"

    def __init__(self, negative_slope: float = 0.01):
        super().__init__()
        if not 0 < negative_slope < 1:
            raise ValueError("LeakyReLU slope must lie in (0, 1)")
        self.negative_slope = negative_slope

    def config(self):
        return {"negative_slope": self.negative_slope}

    def flops(self, in_shape):
        return math.prod(in_shape)

    def forward(self, x, training=False, rng=None):
        scale = np.where(x > 0, 1.0, self.negative_slope)
        self._cache = scale
        return x * scale

    def backward(self, gy, accumulate=True):
        return gy * self._cached()


class ELU(Layer):
    kind = "ELU"

    def __init__(self, alpha: float = 1.0):
        super().__init__()
        self.alpha = alpha

    def config(self):
        return {"alpha": self.alpha}

    def flops(self, in_shape):
        return math.prod(in_shape)

    def forward(self, x, training=False, rng=None):
        neg = self.alpha * np.expm1(np.minimum(x, 0.0))
        y = np.where(x > 0, x, neg)
        self._cache = (x > 0, neg)
        return y

    def backward(self, gy, accumulate=True):
        pos, neg = self._cached()
        return gy * np.where(pos, 1.0, neg + self.alpha)


class Dropout(Layer):
    """Inverted dropout: surviving units are scaled by 1/(1-rate) in training."""

    kind = "Dropout"

    def __init__(self, rate: float = 0.5):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValueError("Dropout rate must lie in [0, 1)")
        self.rate = rate
        self._identity = None

    def config(self):
        return {"rate": self.rate}

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0:
            self._cache = None
            self._identity = True
            return x
        if rng is None:
            raise ValueError("Dropout in training mode needs an explicit rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep) / keep
        self._identity = False
        self._cache = mask
        return x * mask

    def backward(self, gy, accumulate=True):
        if self._identity is None:
            raise RuntimeError("Dropout.backward called without a cached forward pass")
        if self._identity:
            return gy
        return gy * self._cached()


class LogSoftmax(Layer):
    kind = "LogSoftmax"

    def flops(self, in_shape):
        return math.prod(in_shape)

    def forward(self, x, training=False, rng=None):
        shifted = x - x.max(axis=-1, keepdims=True)
        y = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        self._cache = y
        return y

    def backward(self, gy, accumulate=True):
        y = self._cached()
        return gy - np.exp(y) * gy.sum(axis=-1, keepdims=True)


class Reshape(Layer):
    """Per-sample reshape; ``Reshape((n,))`` flattens."""

    kind = "Reshape"

    def __init__(self, target_shape):
        super().__init__()
        self.target_shape = tuple(int(d) for d in target_shape)

    def config(self):
        return {"target_shape": list(self.target_shape)}

    def out_shape(self, in_shape):
        if math.prod(in_shape) != math.prod(self.target_shape):
            raise ShapeError(f"cannot reshape {tuple(in_shape)} to {self.target_shape}")
        return self.target_shape

    def forward(self, x, training=False, rng=None):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.target_shape)

    def backward(self, gy, accumulate=True):
        return gy.reshape(self._cached())


LAYER_KINDS: dict[str, type[Layer]] = {
    cls.kind: cls
    for cls in (
        Linear, Conv1d, ConvTranspose1d, BatchNorm1d, ReLU, LeakyReLU, ELU,
        Dropout, LogSoftmax, Reshape,
    )
}


def layer_from_config(kind: str, config: dict) -> Layer:
    try:
        cls = LAYER_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    return cls(**config)


__all__ = [
    "Layer", "Linear", "Conv1d", "ConvTranspose1d", "BatchNorm1d", "ReLU", "LeakyReLU",
    "ELU", "Dropout", "LogSoftmax", "Reshape", "LAYER_KINDS", "layer_from_config",
    "NonFiniteError", "check_finite",
]
