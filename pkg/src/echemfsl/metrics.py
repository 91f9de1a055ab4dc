"""Evaluation: relative RMSE against held-out curves, curve prediction,
and a pairwise cosine-distance dispersion statistic for dataset geometry.

Relative RMSE is normalized by the mean of the true voltages (the
"relative" convention adopted throughout and recorded in every report).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetBundle, ExperimentalSet
from .netcore import NetworkModel
from .physics import CellDesign, PolarizationPoint

#: Above this many records the dispersion statistic subsamples, seeded.
DISPERSION_EXACT_LIMIT = 2000


def rrmse(pred, truth) -> float:
    """Relative root mean squared error, in percent.

    Normalized by mean(truth), which must be positive: the statistic is
    meant for polarization voltages in the operating window.
    """
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("rrmse needs at least one point")
    mean_truth = float(truth.mean())
    if mean_truth <= 0.0:
        raise ValueError(
            f"rrmse requires mean(truth) > 0, got {mean_truth:g}"
        )
    return 100.0 * float(np.sqrt(np.mean((pred - truth) ** 2))) / mean_truth


@dataclass(frozen=True)
class EvalReport:
    """Scored prediction of one condition (temperature) of one dataset."""

    dataset_id: str
    condition_temp_c: float
    rrmse_percent: float
    n_points: int
    predicted: tuple
    is_holdout: bool
    normalizer: str = "mean"
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.rrmse_percent < 0.0:
            raise ValueError("rrmse_percent must be >= 0")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")

    def to_json(self) -> str:
        return json.dumps({
            "dataset_id": self.dataset_id,
            "condition_temp_c": self.condition_temp_c,
            "rrmse_percent": self.rrmse_percent,
            "n_points": self.n_points,
            "is_holdout": self.is_holdout,
            "normalizer": self.normalizer,
            "provenance": self.provenance,
            "predicted": [
                {"current_a_cm2": p.current_density, "voltage_v": p.voltage}
                for p in self.predicted
            ],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        obj = json.loads(text)
        return cls(
            dataset_id=obj["dataset_id"],
            condition_temp_c=float(obj["condition_temp_c"]),
            rrmse_percent=float(obj["rrmse_percent"]),
            n_points=int(obj["n_points"]),
            predicted=tuple(
                PolarizationPoint(p["current_a_cm2"], p["voltage_v"])
                for p in obj["predicted"]
            ),
            is_holdout=bool(obj["is_holdout"]),
            normalizer=obj.get("normalizer", "mean"),
            provenance=obj.get("provenance", ""),
        )


def predict_standardized(model: NetworkModel, features: np.ndarray) -> np.ndarray:
    """Physical-unit predictions for raw (unstandardized) feature rows."""
    if model.standardizer is None:
        raise ValueError("model carries no standardizer; cannot predict raw features")
    z = model.standardizer.transform_features(np.asarray(features, dtype=float))
    return model.standardizer.invert_labels(model.forward(z)[:, 0])


def predict_curve(model: NetworkModel, design: CellDesign, i_grid) -> list:
    """Predict one polarization curve on an ascending current grid."""
    grid = np.asarray(i_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("i_grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0.0):
        raise ValueError("i_grid must be sorted ascending")
    from .dataset import DESIGN_VARIABLES, N_FEATURES  # local to avoid cycle at import

    features = np.empty((grid.size, N_FEATURES))
    features[:, :11] = [getattr(design, name) for name in DESIGN_VARIABLES]
    features[:, 11] = grid
    voltages = predict_standardized(model, features)
    if np.any(~np.isfinite(voltages)):
        k = int(np.argmax(~np.isfinite(voltages)))
        raise ValueError(
            f"non-finite prediction at current {grid[k]:g} A/cm^2 for {design}"
        )
    return [PolarizationPoint(float(i), float(v)) for i, v in zip(grid, voltages)]


def evaluate_condition(model: NetworkModel, expset: ExperimentalSet,
                       temp_c: float) -> EvalReport:
    """Score the model against one measured temperature curve."""
    part = expset.condition_bundle(temp_c)
    pred = predict_standardized(model, part.features)
    score = rrmse(pred, part.labels)
    predicted = tuple(
        PolarizationPoint(float(i), float(v))
        for i, v in zip(part.features[:, 11], pred)
    )
    return EvalReport(
        dataset_id=expset.id,
        condition_temp_c=float(temp_c),
        rrmse_percent=score,
        n_points=len(part),
        predicted=predicted,
        is_holdout=(float(temp_c) == expset.holdout_condition),
        provenance=model.provenance,
    )


def evaluate_holdout(model: NetworkModel, expset: ExperimentalSet) -> EvalReport:
    """Score the model on the held-out temperature curve."""
    return evaluate_condition(model, expset, expset.holdout_condition)


def evaluate_all(model: NetworkModel, expset: ExperimentalSet) -> list:
    """One report per condition, in ascending temperature order."""
    return [evaluate_condition(model, expset, t) for t in expset.conditions]


def cosine_dispersion(records, seed: int = 0) -> float:
    """Mean pairwise cosine distance (1 - cosine similarity).

    Exact over all unordered pairs up to 2,000 records; larger inputs are
    reduced to a seeded 2,000-record subsample first.  Pairs touching a
    zero-norm record are skipped and the skip count reported as a warning.
    """
    if isinstance(records, DatasetBundle):
        feats = records.features
    else:
        feats = np.asarray(records, dtype=float)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise ValueError("cosine_dispersion needs >= 2 records")
    n = feats.shape[0]
    if n > DISPERSION_EXACT_LIMIT:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=DISPERSION_EXACT_LIMIT, replace=False))
        feats = feats[idx]
        n = DISPERSION_EXACT_LIMIT
    norms = np.linalg.norm(feats, axis=1)
    nonzero = norms > 0.0
    total_pairs = n * (n - 1) // 2
    m = int(nonzero.sum())
    used_pairs = m * (m - 1) // 2
    skipped = total_pairs - used_pairs
    if skipped:
        warnings.warn(
            f"cosine_dispersion skipped {skipped} pair(s) with zero-norm records",
            stacklevel=2,
        )
    if used_pairs == 0:
        raise ValueError("no pair of nonzero-norm records to compare")
    unit = feats[nonzero] / norms[nonzero, None]
    gram = unit @ unit.T
    iu = np.triu_indices(m, k=1)
    return float(np.mean(1.0 - gram[iu]))


def export_curve_plot(svg_path, csv_path, title: str, measured,
                      model_curve, baseline_curve=None) -> None:
    """Polarization-curve overlay as standalone SVG plus a CSV of series.

    ``measured``, ``model_curve``, ``baseline_curve`` are sequences of
    PolarizationPoint.  Output is byte-reproducible: no timestamps, fixed
    hash salt.
    """
    import csv as _csv
    import io

    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "echemfsl", "figure.dpi": 100}):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        try:
            if measured:
                ax.plot([p.current_density for p in measured],
                        [p.voltage for p in measured],
                        "o", color="#333333", label="measured", markersize=4)
            ax.plot([p.current_density for p in model_curve],
                    [p.voltage for p in model_curve],
                    "-", color="#c23b22", label="model")
            if baseline_curve:
                ax.plot([p.current_density for p in baseline_curve],
                        [p.voltage for p in baseline_curve],
                        "--", color="#4878a8", label="baseline")
            ax.set_xlabel("current density / A cm$^{-2}$")
            ax.set_ylabel("cell voltage / V")
            ax.set_title(title)
            ax.legend(frameon=False)
            fig.tight_layout()
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "current_a_cm2", "voltage_v"])
    for name, curve in (("measured", measured), ("model", model_curve),
                        ("baseline", baseline_curve or ())):
        for p in curve:
            writer.writerow([name, repr(p.current_density), repr(p.voltage)])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
