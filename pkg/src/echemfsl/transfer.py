"""Few-shot transfer: differential-rate finetuning and new-task extension.

A source model pretrained on simulated data is adapted to a measured
dataset either by retraining all layers with group-specific learning
rates (small rates effectively freeze early layers) or, for a different
device class, by swapping the scalar head for a fresh two-layer head and
training with the same differential scheme.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .dataset import DatasetBundle, ExperimentalSet, Standardizer, split_holdout
from .netcore import (
    CONVNET,
    FCNET,
    NEWTASK_SUFFIX,
    AdamState,
    Dense,
    NetworkModel,
    ParamGroup,
    ReLU,
    TrainHistory,
    build_architecture,
    init_uniform,
    train_epochs,
    uniform_rates,
)
from .physics import Mode

#: Default pretraining rate (the uniform stage has no published value).
DEFAULT_LR0 = 1e-3

#: Finetuning epoch budget and early-stop rule for tiny target datasets.
DEFAULT_FINETUNE_EPOCHS = 2000
EARLY_STOP_DELTA = 1e-7
EARLY_STOP_WINDOW = 100

NEW_TASK_HIDDEN = 32


@dataclass(frozen=True)
class LRScheme:
    """Per-group learning rates, written ``[input, general, task]``.

    Two-entry schemes (``[input, task]``) are the published form for the
    dense network, whose middle layer rides with the task rate; they are
    rejected for architectures with distinct general-group layers.

    A zero rate freezes its group bitwise; an all-zero scheme is legal
    and leaves every parameter untouched, which retention tests rely on.
    """

    input: float
    task: float
    general: float | None = None

    def __post_init__(self) -> None:
        rates = [self.input, self.task] + ([] if self.general is None else [self.general])
        if any(not (np.isfinite(r) and r >= 0.0) for r in rates):
            raise ConfigError(f"learning rates must be finite and >= 0, got {rates}")

    @classmethod
    def parse(cls, text: str) -> "LRScheme":
        """Parse ``"1e-8, 8e-6, 2e-4"`` (brackets optional) into a scheme."""
        body = text.strip().lstrip("[").rstrip("]")
        parts = [p.strip() for p in body.split(",") if p.strip()]
        if len(parts) not in (2, 3):
            raise ConfigError(
                f"scheme {text!r} must have 2 or 3 rates, got {len(parts)}"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"scheme {text!r} has a non-numeric rate") from None
        if len(values) == 2:
            return cls(input=values[0], task=values[1])
        return cls(input=values[0], general=values[1], task=values[2])

    def __str__(self) -> str:
        if self.general is None:
            return f"[{self.input:g}, {self.task:g}]"
        return f"[{self.input:g}, {self.general:g}, {self.task:g}]"

    def rates_for(self, model: NetworkModel) -> dict:
        """Group-to-rate map for a concrete model.

        A model with general-group layers needs a three-entry scheme
        unless it is the dense architecture, where the published
        two-entry form means "general rides with task".
        """
        general = self.general
        groups = model.groups_present()
        if general is None and ParamGroup.GENERAL in groups:
            if not model.arch.startswith(FCNET):
                raise ConfigError(
                    f"two-entry scheme {self} cannot drive arch {model.arch!r}; "
                    f"its general-group layers need an explicit rate"
                )
            general = self.task
        out = {ParamGroup.INPUT: self.input, ParamGroup.TASK: self.task}
        if ParamGroup.GENERAL in groups:
            out[ParamGroup.GENERAL] = general
        return out


@dataclass(frozen=True)
class TransferRun:
    """Everything that determines one transfer-training run bit-for-bit."""

    source_path: str
    dataset_id: str
    scheme: LRScheme
    batch_size: int
    epochs: int
    seed: int
    strategy: str  # "finetune" | "newtask"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.strategy not in ("finetune", "newtask"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")


def pretrain_source(arch: str, source: DatasetBundle, lr0: float = DEFAULT_LR0,
                    batch_size: int = 128, epochs: int = 200, seed: int = 0,
                    val_fraction: float = 0.1,
                    standardizer: Standardizer | None = None):
    """Train a fresh source model with one uniform learning rate.

    ``source`` must already be standardized; pass the fitted standardizer
    so the model can carry it to transfer time.  A seeded fraction of the
    records is held out and its loss recorded per epoch alongside the
    training loss.  Returns ``(model, history)``.
    """
    if lr0 < 0.0 or not np.isfinite(lr0):
        raise ConfigError(f"lr0 must be finite and >= 0, got {lr0}")
    rng = np.random.default_rng(seed)
    train, held = source.split(val_fraction, rng)
    model = build_architecture(arch, seed=seed)
    model.standardizer = standardizer
    model.provenance = (
        f"pretrain arch={arch} lr0={lr0:g} batch={batch_size} "
        f"epochs={epochs} seed={seed} n={len(source)}"
    )
    history = train_epochs(
        model, train.features, train.labels, batch_size,
        uniform_rates(model, lr0), epochs, rng,
        eval_features=held.features, eval_labels=held.labels,
    )
    return model, history


def _target_train_arrays(source: NetworkModel, target: ExperimentalSet):
    """Standardized training split of a target set, holdout excluded."""
    if source.standardizer is None:
        raise ValueError("source model carries no standardizer; cannot transfer")
    train, _ = split_holdout(target)
    s = source.standardizer
    return s.transform_features(train.features), s.transform_labels(train.labels)


def finetune(source: NetworkModel, target: ExperimentalSet, scheme: LRScheme,
             batch_size: int, epochs: int = DEFAULT_FINETUNE_EPOCHS,
             seed: int = 0):
    """Differential-rate adaptation of a copy of the source model.

    All layers train on the target's non-holdout points with their
    group's rate; the source model itself is never mutated.  Returns
    ``(model, history)``.
    """
    rates = scheme.rates_for(source)
    features, labels = _target_train_arrays(source, target)
    model = source.copy()
    model.provenance += (
        f" | finetune target={target.id} scheme={scheme} "
        f"batch={batch_size} epochs={epochs} seed={seed}"
    )
    history = train_epochs(
        model, features, labels, batch_size, rates, epochs, seed,
        early_stop_delta=EARLY_STOP_DELTA, early_stop_window=EARLY_STOP_WINDOW,
    )
    return model, history


def extend_for_new_task(source: NetworkModel, hidden_width: int = NEW_TASK_HIDDEN,
                        seed: int = 0) -> NetworkModel:
    """Swap the scalar head for a fresh two-layer task head.

    The final Dense(k, 1) is replaced by Dense(k, hidden) - ReLU -
    Dense(hidden, 1), both task-group, seeded independently of the
    retained layers, which keep their weights and tags bitwise.
    """
    if source.arch.endswith(NEWTASK_SUFFIX):
        raise ValueError(
            f"model {source.arch!r} already carries a new-task head; "
            f"extending twice is rejected"
        )
    if hidden_width < 1:
        raise ValueError(f"hidden_width must be >= 1, got {hidden_width}")
    head = source.layers[-1] if source.layers else None
    if not (isinstance(head, Dense) and head.n_out == 1):
        raise ValueError("source model lacks the expected Dense(->1) output head")
    model = source.copy()
    retained = model.layers[:-1]
    rng = np.random.default_rng(seed)
    hidden = Dense(head.n_in, hidden_width, ParamGroup.TASK)
    hidden.w = init_uniform(rng, (head.n_in, hidden_width), fan_in=head.n_in)
    out = Dense(hidden_width, 1, ParamGroup.TASK)
    out.w = init_uniform(rng, (hidden_width, 1), fan_in=hidden_width)
    model.layers = retained + [hidden, ReLU(), out]
    model.arch = source.arch + NEWTASK_SUFFIX
    model.provenance += f" | extend hidden={hidden_width} seed={seed}"
    return model


def new_task_train(source: NetworkModel, target: ExperimentalSet,
                   scheme: LRScheme, batch_size: int,
                   epochs: int = DEFAULT_FINETUNE_EPOCHS, seed: int = 0):
    """Head extension followed by differential-rate training on a pump set.

    Returns ``(model, history)``.  The extension and the training shuffles
    both derive from ``seed``, so the run is reproducible end to end.
    """
    if target.mode is not Mode.HYDROGEN_PUMP:
        raise ValueError(
            f"new-task training expects a hydrogen-pump target, got "
            f"mode {target.mode.value!r}"
        )
    extended = extend_for_new_task(source, NEW_TASK_HIDDEN, seed=seed)
    rates = scheme.rates_for(extended)
    features, labels = _target_train_arrays(extended, target)
    extended.provenance += (
        f" | newtask target={target.id} scheme={scheme} "
        f"batch={batch_size} epochs={epochs} seed={seed}"
    )
    history = train_epochs(
        extended, features, labels, batch_size, rates, epochs, seed,
        early_stop_delta=EARLY_STOP_DELTA, early_stop_window=EARLY_STOP_WINDOW,
    )
    return extended, history


def train_from_scratch(arch: str, target: ExperimentalSet, scheme: LRScheme,
                       batch_size: int, epochs: int = DEFAULT_FINETUNE_EPOCHS,
                       seed: int = 0, standardizer: Standardizer | None = None):
    """Baseline: identical budget and schedule, but fresh-initialized.

    Used to show that transfer beats training the same architecture on
    the few-shot data alone.  Returns ``(model, history)``.
    """
    model = build_architecture(arch, seed=seed)
    model.standardizer = standardizer
    model.provenance = (
        f"scratch arch={arch} target={target.id} scheme={scheme} "
        f"batch={batch_size} epochs={epochs} seed={seed}"
    )
    rates = scheme.rates_for(model)
    features, labels = _target_train_arrays(model, target)
    history = train_epochs(
        model, features, labels, batch_size, rates, epochs, seed,
        early_stop_delta=EARLY_STOP_DELTA, early_stop_window=EARLY_STOP_WINDOW,
    )
    return model, history


def group_displacement(before: NetworkModel, after: NetworkModel) -> dict:
    """L2 distance between parameter snapshots, per group."""
    groups_a = before.parameter_groups()
    groups_b = after.parameter_groups()
    sums: dict = {}
    for pa, pb, ga, gb in zip(before.parameters(), after.parameters(),
                              groups_a, groups_b):
        if ga is not gb or pa.shape != pb.shape:
            raise ValueError("models do not share an architecture")
        sums[ga] = sums.get(ga, 0.0) + float(np.sum((pa - pb) ** 2))
    return {g: float(np.sqrt(v)) for g, v in sums.items()}


def dataset_sha256(bundle: DatasetBundle) -> str:
    """Content hash of a bundle, for provenance records."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(bundle.features, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(bundle.labels, dtype="<f8").tobytes())
    return digest.hexdigest()


def provenance_record(run: TransferRun, target: ExperimentalSet,
                      history: TrainHistory, final_metrics: dict) -> str:
    """One JSON line describing a completed transfer run."""
    train, _ = split_holdout(target)
    record = {
        "run": run.strategy,
        "source": run.source_path,
        "dataset_id": run.dataset_id,
        "dataset_sha256": dataset_sha256(train),
        "scheme": str(run.scheme),
        "batch_size": run.batch_size,
        "epochs_requested": run.epochs,
        "epochs_run": history.epochs_run(),
        "stopped_early": history.stopped_early,
        "seed": run.seed,
        "final_train_loss": history.train_loss[-1],
        "metrics": final_metrics,
    }
    return json.dumps(record, sort_keys=True)
