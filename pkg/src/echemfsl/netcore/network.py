"""Network container, the two reference architectures, and the loss.

Both architectures map a 12-wide feature row to one voltage.  The dense
network is 12:200:50:1; the convolutional network treats the row as a
1-channel sequence, stacks three convolutions, pools to a fixed length,
and finishes with a two-layer dense head whose penultimate width (50)
matches the dense network, so the transfer machinery sees the same head
shape either way.
"""

from __future__ import annotations

import copy as _copy

import numpy as np

from .layers import (
    AdaptiveMaxPool1d,
    Conv1d,
    Dense,
    Flatten,
    Layer,
    ParamGroup,
    ReLU,
)

N_INPUTS = 12

FCNET = "fcnet"
CONVNET = "convnet"
NEWTASK_SUFFIX = "+newtask"


class NetworkModel:
    """An ordered layer stack with its init seed and input convention.

    ``reshape_input`` lifts flat (n, 12) rows to (n, channels, length)
    for convolutional stacks; dense stacks leave it None.
    """

    def __init__(self, arch: str, layers: list, seed: int,
                 reshape_input: tuple | None = None,
                 standardizer=None, provenance: str = ""):
        self.arch = arch
        self.layers = layers
        self.seed = seed
        self.reshape_input = reshape_input
        self.standardizer = standardizer
        self.provenance = provenance

    def parameters(self) -> list:
        """All parameter arrays, in layer order, weights before biases."""
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def parameter_groups(self) -> list:
        """Group tag of each entry of parameters(), aligned by index."""
        out = []
        for layer in self.layers:
            out.extend([layer.group] * len(layer.params()))
        return out

    def gradients(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def groups_present(self) -> set:
        return {g for g in self.parameter_groups()}

    def _lift(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=float)
        if batch.ndim != 2 or batch.shape[1] != N_INPUTS:
            raise ValueError(
                f"expected batch of shape (n, {N_INPUTS}), got {batch.shape}"
            )
        if self.reshape_input is not None:
            c, length = self.reshape_input
            return batch.reshape(batch.shape[0], c, length)
        return batch

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Predict one standardized output column for a standardized batch."""
        x = self._lift(batch)
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_collect(self, batch: np.ndarray) -> list:
        """Forward pass returning every layer input plus the output.

        Entry k is the input to layer k; the last entry is the network
        output.  Used to restart partial forward passes cheaply.
        """
        x = self._lift(batch)
        acts = [x]
        for layer in self.layers:
            x = layer.forward(x)
            acts.append(x)
        return acts

    def forward_from(self, layer_index: int, x: np.ndarray) -> np.ndarray:
        """Run layers[layer_index:] on a cached intermediate activation."""
        for layer in self.layers[layer_index:]:
            x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> None:
        """Backpropagate a loss gradient; layer gradients are left filled."""
        g = grad_out
        for layer in reversed(self.layers):
            g = layer.backward(g)

    def copy(self) -> "NetworkModel":
        """Deep copy; training the copy never touches the original."""
        return _copy.deepcopy(self)

    def describe(self) -> dict:
        """Architecture descriptor used by the serializer."""
        layer_specs = []
        for layer in self.layers:
            layer_specs.append({
                "kind": type(layer).__name__,
                "group": layer.group.value if layer.group else None,
                **layer.spec(),
            })
        return {
            "arch": self.arch,
            "seed": self.seed,
            "reshape_input": list(self.reshape_input) if self.reshape_input else None,
            "layers": layer_specs,
        }


def mse_loss(pred: np.ndarray, labels: np.ndarray):
    """Mean squared error and its gradient with respect to pred."""
    pred = np.asarray(pred, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if pred.shape != labels.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs labels {labels.shape}")
    if pred.size == 0:
        raise ValueError("mse_loss needs at least one element")
    diff = pred - labels
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def loss_on(model: NetworkModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Convenience: MSE of the model on a standardized feature/label pair."""
    pred = model.forward(features)
    loss, _ = mse_loss(pred, labels.reshape(pred.shape))
    return loss


def backward_pass(model: NetworkModel, features: np.ndarray, labels: np.ndarray):
    """Forward + loss + reverse sweep; returns (loss, gradient list).

    The returned list aligns with model.parameters(); entries are the
    layers' own gradient buffers.
    """
    pred = model.forward(features)
    loss, grad = mse_loss(pred, np.asarray(labels, dtype=float).reshape(pred.shape))
    model.backward(grad)
    return loss, model.gradients()


def build_fcnet(seed: int = 0) -> NetworkModel:
    """Dense 12:200:50:1 with ReLU between the affine maps."""
    rng = np.random.default_rng(seed)
    layers: list[Layer] = [
        Dense(12, 200, ParamGroup.INPUT, rng),
        ReLU(),
        Dense(200, 50, ParamGroup.GENERAL, rng),
        ReLU(),
        Dense(50, 1, ParamGroup.TASK, rng),
    ]
    return NetworkModel(FCNET, layers, seed)


def build_convnet(seed: int = 0) -> NetworkModel:
    """Three 1-D convolutions, adaptive max pool to 4, dense 256:50:1."""
    rng = np.random.default_rng(seed)
    layers: list[Layer] = [
        Conv1d(1, 16, 3, 1, ParamGroup.INPUT, rng),
        ReLU(),
        Conv1d(16, 32, 3, 1, ParamGroup.GENERAL, rng),
        ReLU(),
        Conv1d(32, 64, 3, 1, ParamGroup.GENERAL, rng),
        ReLU(),
        AdaptiveMaxPool1d(4),
        Flatten(),
        Dense(256, 50, ParamGroup.TASK, rng),
        ReLU(),
        Dense(50, 1, ParamGroup.TASK, rng),
    ]
    return NetworkModel(CONVNET, layers, seed, reshape_input=(1, N_INPUTS))


_BUILDERS = {FCNET: build_fcnet, CONVNET: build_convnet}


def build_architecture(arch: str, seed: int = 0) -> NetworkModel:
    """Build a fresh model of the named architecture."""
    try:
        builder = _BUILDERS[arch]
    except KeyError:
        raise ValueError(
            f"unknown architecture {arch!r}: expected one of {sorted(_BUILDERS)}"
        ) from None
    return builder(seed)
