"""Adam with per-group learning rates, and the mini-batch training loop.

One optimizer step updates every parameter with the learning rate of its
layer's group; a zero rate leaves that group's parameters bit-identical,
which is how layers are frozen during transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigError
from .layers import ParamGroup
from .network import NetworkModel, backward_pass, loss_on


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter list."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model: NetworkModel, beta1: float = 0.9,
                  beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        params = model.parameters()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def check_rates(lr_by_group: dict) -> dict:
    """Validate a group->rate map; rates must be finite and >= 0."""
    for group, rate in lr_by_group.items():
        if not isinstance(group, ParamGroup):
            raise ConfigError(f"learning-rate key {group!r} is not a ParamGroup")
        if not (np.isfinite(rate) and rate >= 0.0):
            raise ConfigError(f"learning rate for {group.value} must be >= 0, got {rate}")
    return lr_by_group


def adam_step(model: NetworkModel, gradients: list, state: AdamState,
              lr_by_group: dict) -> None:
    """One bias-corrected Adam update, in place.

    Moments accumulate for every parameter regardless of rate, so a group
    unfrozen later resumes from meaningful statistics; only the parameter
    write is skipped at rate 0.
    """
    check_rates(lr_by_group)
    params = model.parameters()
    groups = model.parameter_groups()
    if len(gradients) != len(params):
        raise ValueError(
            f"got {len(gradients)} gradients for {len(params)} parameters"
        )
    missing = {g.value for g in set(groups)} - {g.value for g in lr_by_group}
    if missing:
        raise ConfigError(f"no learning rate for group(s) {sorted(missing)}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for p, g, m, v, group in zip(params, gradients, state.m, state.v, groups):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        lr = lr_by_group[group]
        if lr == 0.0:
            continue
        m_hat = m / bias1
        v_hat = v / bias2
        p -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def uniform_rates(model: NetworkModel, lr: float) -> dict:
    """The same rate for every group present in the model."""
    return {group: lr for group in model.groups_present()}


@dataclass
class TrainHistory:
    """Per-epoch losses of one training run."""

    train_loss: list = field(default_factory=list)
    eval_loss: list | None = None
    stopped_early: bool = False

    def epochs_run(self) -> int:
        return len(self.train_loss)


def train_epochs(model: NetworkModel, features: np.ndarray, labels: np.ndarray,
                 batch_size: int, lr_by_group: dict, epochs: int,
                 seed, *, state: AdamState | None = None,
                 eval_features: np.ndarray | None = None,
                 eval_labels: np.ndarray | None = None,
                 early_stop_delta: float | None = None,
                 early_stop_window: int | None = None) -> TrainHistory:
    """Seeded shuffled mini-batch training, in place on the model.

    Each epoch reshuffles with the seeded generator and sweeps batches of
    ``batch_size`` (last batch may be short).  The recorded per-epoch
    training loss is the sample-weighted mean over batches.  With an
    early-stop window, training stops once the best training loss fails
    to improve by ``early_stop_delta`` over that many epochs.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float).reshape(-1, 1)
    n = features.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if labels.shape[0] != n:
        raise ValueError(f"{n} feature rows but {labels.shape[0]} labels")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    check_rates(lr_by_group)
    batch_size = min(batch_size, n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if state is None:
        state = AdamState.for_model(model)

    history = TrainHistory(eval_loss=None if eval_features is None else [])
    best = np.inf
    best_epoch = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            loss, grads = backward_pass(model, features[idx], labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch + 1}; "
                    f"reduce the learning rate"
                )
            adam_step(model, grads, state, lr_by_group)
            total += loss * idx.size
        epoch_loss = total / n
        history.train_loss.append(epoch_loss)
        if history.eval_loss is not None:
            history.eval_loss.append(loss_on(model, eval_features,
                                             np.asarray(eval_labels).reshape(-1, 1)))
        if early_stop_delta is not None and early_stop_window is not None:
            if epoch_loss < best - early_stop_delta:
                best = epoch_loss
                best_epoch = epoch
            elif epoch - best_epoch >= early_stop_window:
                history.stopped_early = True
                break
    return history
