"""Layer vocabulary: dense, 1-D convolution, ReLU, adaptive max pool, flatten.

Each layer caches its forward input and exposes exact reverse-mode
gradients.  Parameterized layers carry a group tag (input / general /
task) that the optimizer maps to a learning rate, which is how the
differential-rate transfer scheme addresses parts of a network.
"""

from __future__ import annotations

import enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ParamGroup(enum.Enum):
    """Learning-rate group of a parameterized layer."""

    INPUT = "input"
    GENERAL = "general"
    TASK = "task"


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """He-style uniform init on +-sqrt(6/fan_in)."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base layer: stateless apart from parameters and forward caches."""

    group: ParamGroup | None = None

    def params(self) -> list:
        return []

    def grads(self) -> list:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        """Shape-defining constructor arguments, for serialization."""
        return {}


class Dense(Layer):
    """Affine map y = x @ w + b for row-major batches."""

    def __init__(self, n_in: int, n_out: int, group: ParamGroup,
                 rng: np.random.Generator | None = None):
        if n_in < 1 or n_out < 1:
            raise ValueError("dense layer needs n_in >= 1 and n_out >= 1")
        self.n_in = n_in
        self.n_out = n_out
        self.group = group
        if rng is None:
            self.w = np.zeros((n_in, n_out))
        else:
            self.w = init_uniform(rng, (n_in, n_out), fan_in=n_in)
        self.b = np.zeros(n_out)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.grad_w, self.grad_b]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(
                f"dense expects (n, {self.n_in}) input, got {x.shape}"
            )
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out):
        self.grad_w = self._x.T @ grad_out
        self.grad_b = grad_out.sum(axis=0)
        return grad_out @ self.w.T

    def spec(self):
        return {"n_in": self.n_in, "n_out": self.n_out}


class Conv1d(Layer):
    """1-D cross-correlation over (batch, channels, length) input."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, group: ParamGroup = ParamGroup.GENERAL,
                 rng: np.random.Generator | None = None):
        if min(in_channels, out_channels, kernel, stride) < 1:
            raise ValueError("conv dimensions and stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.group = group
        fan_in = in_channels * kernel
        if rng is None:
            self.w = np.zeros((out_channels, in_channels, kernel))
        else:
            self.w = init_uniform(rng, (out_channels, in_channels, kernel), fan_in)
        self.b = np.zeros(out_channels)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._windows = None
        self._in_length = 0

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.grad_w, self.grad_b]

    def out_length(self, in_length: int) -> int:
        if in_length < self.kernel:
            raise ValueError(
                f"input length {in_length} shorter than kernel {self.kernel}"
            )
        return (in_length - self.kernel) // self.stride + 1

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"conv expects (n, {self.in_channels}, L) input, got {x.shape}"
            )
        n = x.shape[0]
        l_out = self.out_length(x.shape[2])
        self._in_length = x.shape[2]
        # im2col: one (n*L_out, C_in*K) matrix makes every pass a single GEMM
        win = sliding_window_view(x, self.kernel, axis=2)[:, :, ::self.stride, :]
        win = np.ascontiguousarray(win.transpose(0, 2, 1, 3))
        self._windows = win.reshape(n * l_out, self.in_channels * self.kernel)
        y = self._windows @ self.w.reshape(self.out_channels, -1).T
        return y.reshape(n, l_out, self.out_channels).transpose(0, 2, 1) \
            + self.b[None, :, None]

    def backward(self, grad_out):
        n, _, l_out = grad_out.shape
        g2 = np.ascontiguousarray(grad_out.transpose(0, 2, 1))
        g2 = g2.reshape(n * l_out, self.out_channels)
        self.grad_w = (g2.T @ self._windows).reshape(self.w.shape)
        self.grad_b = grad_out.sum(axis=(0, 2))
        cols = (g2 @ self.w.reshape(self.out_channels, -1)).reshape(
            n, l_out, self.in_channels, self.kernel
        )
        cols = cols.transpose(0, 2, 1, 3)  # (n, C_in, L_out, K)
        grad_x = np.zeros((n, self.in_channels, self._in_length))
        span = self.stride * l_out
        for k in range(self.kernel):
            grad_x[:, :, k:k + span:self.stride] += cols[:, :, :, k]
        return grad_x

    def spec(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
        }


class ReLU(Layer):
    """Elementwise max(x, 0); the subgradient at exactly 0 is taken as 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0.0
        return x * self._mask

    def backward(self, grad_out):
        return grad_out * self._mask


class AdaptiveMaxPool1d(Layer):
    """Max over contiguous bins chosen to yield a fixed output length.

    Bin j of output length m over input length L covers indices
    [floor(j*L/m), floor((j+1)*L/m)); ties take the first maximum.
    """

    def __init__(self, out_length: int):
        if out_length < 1:
            raise ValueError("pool output length must be >= 1")
        self.out_length_ = out_length
        self._argmax = None
        self._in_shape = None

    @staticmethod
    def bin_edges(in_length: int, out_length: int) -> list:
        return [
            (j * in_length // out_length, (j + 1) * in_length // out_length)
            for j in range(out_length)
        ]

    def forward(self, x):
        if x.ndim != 3:
            raise ValueError(f"pool expects (n, C, L) input, got {x.shape}")
        n, c, length = x.shape
        if length < self.out_length_:
            raise ValueError(
                f"cannot pool length {length} down to {self.out_length_}"
            )
        self._in_shape = x.shape
        out = np.empty((n, c, self.out_length_))
        self._argmax = np.empty((n, c, self.out_length_), dtype=np.intp)
        for j, (lo, hi) in enumerate(self.bin_edges(length, self.out_length_)):
            if hi - lo == 1:
                self._argmax[:, :, j] = lo
                out[:, :, j] = x[:, :, lo]
                continue
            seg = x[:, :, lo:hi]
            idx = seg.argmax(axis=2)
            self._argmax[:, :, j] = lo + idx
            out[:, :, j] = np.take_along_axis(seg, idx[:, :, None], axis=2)[:, :, 0]
        return out

    def backward(self, grad_out):
        grad_x = np.zeros(self._in_shape)
        np.put_along_axis(grad_x, self._argmax, grad_out, axis=2)
        return grad_x

    def spec(self):
        return {"out_length": self.out_length_}


class Flatten(Layer):
    """(n, C, L) -> (n, C*L), row-major."""

    def __init__(self):
        self._in_shape = None

    def forward(self, x):
        if x.ndim != 3:
            raise ValueError(f"flatten expects (n, C, L) input, got {x.shape}")
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._in_shape)
