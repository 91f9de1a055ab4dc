"""Minimal differentiable-network engine used by the transfer workbench."""

from .layers import (
    AdaptiveMaxPool1d,
    Conv1d,
    Dense,
    Flatten,
    Layer,
    ParamGroup,
    ReLU,
    init_uniform,
)
from .network import (
    CONVNET,
    FCNET,
    NEWTASK_SUFFIX,
    N_INPUTS,
    NetworkModel,
    backward_pass,
    build_architecture,
    build_convnet,
    build_fcnet,
    loss_on,
    mse_loss,
)
from .optim import (
    AdamState,
    TrainHistory,
    TrainingDivergedError,
    adam_step,
    train_epochs,
    uniform_rates,
)
from .serialize import ModelFormatError, load_model, save_model

__all__ = [
    "AdaptiveMaxPool1d",
    "AdamState",
    "CONVNET",
    "Conv1d",
    "Dense",
    "FCNET",
    "Flatten",
    "Layer",
    "ModelFormatError",
    "N_INPUTS",
    "NEWTASK_SUFFIX",
    "NetworkModel",
    "ParamGroup",
    "ReLU",
    "TrainHistory",
    "TrainingDivergedError",
    "adam_step",
    "backward_pass",
    "build_architecture",
    "build_convnet",
    "build_fcnet",
    "init_uniform",
    "load_model",
    "loss_on",
    "mse_loss",
    "save_model",
    "train_epochs",
    "uniform_rates",
]
