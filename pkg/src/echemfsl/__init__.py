"""Few-shot transfer learning for high-temperature PEM cell polarization.

The package couples a closed-form polarization model (``physics``) with a
small reverse-mode network engine (``netcore``).  Balanced factorial
sweeps of the closed-form model pretrain source networks (``dataset``,
``transfer.pretrain_source``); experimental polarization curves with only
tens of points then adapt them, either by differential-learning-rate
finetuning for a new membrane-electrode assembly or by head extension for
an electrochemical hydrogen pump (``transfer``).  ``metrics`` scores
everything with mean-normalized relative RMSE, and ``cli`` binds the
pipeline into reproducible run directories.
"""

__version__ = "0.1.0"

from .config import ConfigError
from .dataset import (
    DatasetBundle,
    DatasetFormatError,
    ExperimentalSet,
    FactorialSpec,
    ParseError,
    SampleRecord,
    Standardizer,
    apply_standardizer,
    build_source_dataset,
    default_source_bundle,
    fit_standardizer,
    generate_factorial,
    load_dataset,
    load_experimental_csv,
    load_standardizer,
    split_holdout,
    write_dataset,
    write_experimental_csv,
    write_standardizer,
)
from .metrics import (
    EvalReport,
    cosine_dispersion,
    evaluate_all,
    evaluate_condition,
    evaluate_holdout,
    predict_curve,
    rrmse,
)
from .netcore import (
    AdamState,
    NetworkModel,
    ParamGroup,
    TrainingDivergedError,
    adam_step,
    build_architecture,
    build_convnet,
    build_fcnet,
    load_model,
    save_model,
    train_epochs,
)
from .physics import (
    CellDesign,
    Mode,
    Overpotentials,
    PhysicsParams,
    PolarizationPoint,
    cell_voltage,
    overpotentials,
    sample_curve,
)
from .transfer import (
    LRScheme,
    TransferRun,
    extend_for_new_task,
    finetune,
    group_displacement,
    new_task_train,
    pretrain_source,
    train_from_scratch,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DatasetBundle",
    "DatasetFormatError",
    "ExperimentalSet",
    "FactorialSpec",
    "ParseError",
    "SampleRecord",
    "Standardizer",
    "apply_standardizer",
    "build_source_dataset",
    "default_source_bundle",
    "fit_standardizer",
    "generate_factorial",
    "load_dataset",
    "load_experimental_csv",
    "load_standardizer",
    "split_holdout",
    "write_dataset",
    "write_experimental_csv",
    "write_standardizer",
    "EvalReport",
    "cosine_dispersion",
    "evaluate_all",
    "evaluate_condition",
    "evaluate_holdout",
    "predict_curve",
    "rrmse",
    "AdamState",
    "NetworkModel",
    "ParamGroup",
    "TrainingDivergedError",
    "adam_step",
    "build_architecture",
    "build_convnet",
    "build_fcnet",
    "load_model",
    "save_model",
    "train_epochs",
    "CellDesign",
    "Mode",
    "Overpotentials",
    "PhysicsParams",
    "PolarizationPoint",
    "cell_voltage",
    "overpotentials",
    "sample_curve",
    "LRScheme",
    "TransferRun",
    "extend_for_new_task",
    "finetune",
    "group_displacement",
    "new_task_train",
    "pretrain_source",
    "train_from_scratch",
]
