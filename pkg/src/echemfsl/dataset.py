"""Source-dataset construction, standardization, and experimental ingestion.

The source dataset is a full factorial sweep of the 11 design variables,
each design sampled at the standard current fractions.  Records are kept
as two aligned arrays (features ``(n, 12)``, labels ``(n,)``) rather than
one object per record; 885,735 rows make per-record objects wasteful.

Experimental datasets arrive as small CSV files: a metadata block with
the device design, then per-temperature polarization points.  The split
helper holds out one full temperature curve for testing.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ConfigError
from .physics import (
    CellDesign,
    Mode,
    PhysicsParams,
    PolarizationPoint,
    sample_curve,
)

#: The 11 design variables, in canonical (factorial and feature) order.
DESIGN_VARIABLES = (
    "s_h2",
    "s_o2",
    "temperature",
    "pressure",
    "iec_mem",
    "iec_io",
    "delta_mem",
    "delta_io",
    "co_h2_ratio",
    "load_anode",
    "load_cathode",
)

#: Feature columns of one sample: the design variables plus current density.
FEATURE_NAMES = DESIGN_VARIABLES + ("current_a_cm2",)

N_FEATURES = len(FEATURE_NAMES)  # 12

_DATASET_MAGIC = b"ECFSLDAT"
_DATASET_VERSION = 1

_CSV_METADATA_KEYS = (
    "id",
    "mode",
    "s_h2",
    "s_o2",
    "pressure_atm",
    "iec_mem",
    "iec_io",
    "delta_mem_cm",
    "delta_io_cm",
    "co_h2_ratio",
    "load_an",
    "load_cat",
    "holdout_temp_c",
)

_CSV_DATA_HEADER = ("temp_c", "current_a_cm2", "voltage_v")


class ParseError(ValueError):
    """Malformed experimental CSV; message carries file and line number."""


class DatasetFormatError(ValueError):
    """Corrupt or incompatible binary dataset file."""


@dataclass(frozen=True)
class SampleRecord:
    """One training sample: 12 features and a voltage label."""

    features: np.ndarray
    label: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.features, dtype=float)
        if arr.shape != (N_FEATURES,):
            raise ValueError(f"features must have shape ({N_FEATURES},), got {arr.shape}")
        object.__setattr__(self, "features", arr)
        if not np.isfinite(self.label):
            raise ValueError(f"label must be finite, got {self.label}")


class DatasetBundle:
    """A list of sample records stored as two aligned arrays.

    ``features`` is ``(n, 12)`` float64, ``labels`` is ``(n,)`` float64.
    Immutable after construction; all transforms return new bundles.
    """

    __slots__ = ("features", "labels")

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != N_FEATURES:
            raise ValueError(
                f"features must be (n, {N_FEATURES}), got {features.shape}"
            )
        if labels.shape != (features.shape[0],):
            raise ValueError(
                f"labels must be ({features.shape[0]},), got {labels.shape}"
            )
        self.features = features
        self.labels = labels
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return self.features.shape[0]

    def record(self, i: int) -> SampleRecord:
        return SampleRecord(self.features[i].copy(), float(self.labels[i]))

    @classmethod
    def from_records(cls, records) -> "DatasetBundle":
        records = list(records)
        if not records:
            raise ValueError("cannot build a bundle from zero records")
        feats = np.stack([np.asarray(r.features, dtype=float) for r in records])
        labels = np.array([r.label for r in records], dtype=float)
        return cls(feats, labels)

    def take(self, indices) -> "DatasetBundle":
        idx = np.asarray(indices, dtype=np.intp)
        return DatasetBundle(self.features[idx], self.labels[idx])

    def subsample(self, n: int, seed) -> "DatasetBundle":
        """Seeded uniform subsample without replacement, in dataset order."""
        if not 1 <= n <= len(self):
            raise ValueError(f"subsample size {n} outside [1, {len(self)}]")
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(self), size=n, replace=False))
        return self.take(idx)

    def split(self, holdout_fraction: float, seed):
        """Seeded random partition into (train, holdout) bundles."""
        if not 0.0 < holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        n_hold = max(1, int(round(holdout_fraction * len(self))))
        if n_hold >= len(self):
            raise ValueError("holdout fraction leaves no training data")
        perm = np.random.default_rng(seed).permutation(len(self))
        return self.take(perm[n_hold:]), self.take(perm[:n_hold])

    def concat(self, other: "DatasetBundle") -> "DatasetBundle":
        return DatasetBundle(
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
        )


def _table1_default(levels):
    return field(default=tuple(levels))


@dataclass(frozen=True)
class FactorialSpec:
    """Ordered level lists for the 11 design variables.

    Defaults are the canonical 3-level box (temperatures in K, pressures
    in atm, thicknesses in cm, loadings in mg/cm^2).
    """

    s_h2: tuple = _table1_default((1.0, 1.5, 2.0))
    s_o2: tuple = _table1_default((2.0, 2.5, 3.0))
    temperature: tuple = _table1_default((423.0, 463.0, 503.0))
    pressure: tuple = _table1_default((1.0, 1.5, 2.0))
    iec_mem: tuple = _table1_default((1.5, 2.25, 3.0))
    iec_io: tuple = _table1_default((1.5, 2.25, 3.0))
    delta_mem: tuple = _table1_default((0.001, 0.005, 0.01))
    delta_io: tuple = _table1_default((5e-5, 1e-4, 2e-4))
    co_h2_ratio: tuple = _table1_default((0.0, 0.05, 0.1))
    load_anode: tuple = _table1_default((0.1, 0.35, 0.6))
    load_cathode: tuple = _table1_default((0.1, 0.35, 0.6))

    def __post_init__(self) -> None:
        for name in DESIGN_VARIABLES:
            levels = tuple(float(v) for v in getattr(self, name))
            if len(levels) < 1:
                raise ConfigError(f"variable {name!r} has an empty level list")
            object.__setattr__(self, name, levels)

    def level_lists(self) -> list:
        return [getattr(self, name) for name in DESIGN_VARIABLES]

    def n_designs(self) -> int:
        out = 1
        for levels in self.level_lists():
            out *= len(levels)
        return out


def generate_factorial(spec: FactorialSpec) -> list:
    """Full Cartesian product of the level lists, lexicographic order.

    The first variable varies slowest, matching nested iteration over the
    level lists in canonical order.
    """
    designs = []
    for combo in itertools.product(*spec.level_lists()):
        designs.append(CellDesign(*combo))
    return designs


def build_source_dataset(
    designs, n_points: int, params: PhysicsParams
) -> DatasetBundle:
    """Sample every design at the standard current fractions.

    Output rows are ordered by design, then by ascending current; the
    result is bit-reproducible.  Designs producing non-finite voltages
    are rejected with a diagnostic naming the design.
    """
    designs = list(designs)
    if not designs:
        raise ValueError("no designs to sample")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    n = len(designs) * n_points
    features = np.empty((n, N_FEATURES), dtype=np.float64)
    labels = np.empty(n, dtype=np.float64)
    for k, design in enumerate(designs):
        row = [getattr(design, name) for name in DESIGN_VARIABLES]
        points = sample_curve(design, n_points, params)
        base = k * n_points
        for j, pt in enumerate(points):
            features[base + j, :11] = row
            features[base + j, 11] = pt.current_density
            labels[base + j] = pt.voltage
    bad = ~np.isfinite(labels)
    if np.any(bad):
        first = int(np.argmax(bad)) // n_points
        raise ValueError(
            f"design produced non-finite voltage: {designs[first]}"
        )
    return DatasetBundle(features, labels)


@dataclass(frozen=True)
class Standardizer:
    """Column-wise z-score transform fitted on the source dataset.

    Zero-variance columns keep std 1 so they transform to exactly zero.
    The same instance is reused unchanged for all experimental data, so
    the source model's input space stays fixed across transfer.
    """

    mean: np.ndarray
    std: np.ndarray
    label_mean: float
    label_std: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != (N_FEATURES,) or std.shape != (N_FEATURES,):
            raise ValueError(f"mean/std must have shape ({N_FEATURES},)")
        if np.any(std <= 0.0) or self.label_std <= 0.0:
            raise ValueError("standardizer stds must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != N_FEATURES:
            raise ValueError(f"expected (n, {N_FEATURES}) features, got {features.shape}")
        return (features - self.mean) / self.std

    def invert_features(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] != N_FEATURES:
            raise ValueError(f"expected (n, {N_FEATURES}) features, got {z.shape}")
        return z * self.std + self.mean

    def transform_labels(self, labels: np.ndarray) -> np.ndarray:
        return (np.asarray(labels, dtype=float) - self.label_mean) / self.label_std

    def invert_labels(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.label_std + self.label_mean


def fit_standardizer(bundle: DatasetBundle) -> Standardizer:
    """Per-column mean and population standard deviation.

    Constant columns (zero peak-to-peak) keep their exact value as the
    mean and std 1, so they transform to exactly zero; the rounding of an
    averaged constant would otherwise leave a tiny nonzero std.
    """
    if len(bundle) < 2:
        raise ValueError("need at least 2 records to fit a standardizer")
    feats = bundle.features
    pinned = np.ptp(feats, axis=0) == 0.0
    mean = np.where(pinned, feats[0], feats.mean(axis=0))
    std = np.where(pinned, 1.0, feats.std(axis=0))
    std = np.where(std > 0.0, std, 1.0)
    labels = bundle.labels
    if np.ptp(labels) == 0.0:
        label_mean, label_std = float(labels[0]), 1.0
    else:
        label_mean, label_std = float(labels.mean()), float(labels.std())
    return Standardizer(
        mean=mean,
        std=std,
        label_mean=label_mean,
        label_std=label_std if label_std > 0.0 else 1.0,
    )


def apply_standardizer(s: Standardizer, bundle: DatasetBundle) -> DatasetBundle:
    return DatasetBundle(
        s.transform_features(bundle.features), s.transform_labels(bundle.labels)
    )


def invert_standardizer(s: Standardizer, bundle: DatasetBundle) -> DatasetBundle:
    return DatasetBundle(
        s.invert_features(bundle.features), s.invert_labels(bundle.labels)
    )


def write_standardizer(s: Standardizer, path) -> None:
    """JSON persistence; repr floats roundtrip bit-exactly."""
    payload = json.dumps(
        {
            "mean": s.mean.tolist(),
            "std": s.std.tolist(),
            "label_mean": s.label_mean,
            "label_std": s.label_std,
        },
        sort_keys=True,
    ).encode()
    _atomic_write_bytes(path, payload)


def load_standardizer(path) -> Standardizer:
    try:
        with open(path, "rb") as fh:
            obj = json.loads(fh.read())
    except OSError as exc:
        raise DatasetFormatError(f"cannot read standardizer: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: not a standardizer file: {exc}") from exc
    try:
        return Standardizer(
            mean=np.array(obj["mean"], dtype=float),
            std=np.array(obj["std"], dtype=float),
            label_mean=float(obj["label_mean"]),
            label_std=float(obj["label_std"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: bad standardizer contents: {exc}") from exc


def _atomic_write_bytes(path, payload: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_dataset(bundle: DatasetBundle, path) -> None:
    """Framed binary dump: magic, version, row count, width, f64 rows."""
    n, width = bundle.features.shape
    header = struct.pack("<8sIQI", _DATASET_MAGIC, _DATASET_VERSION, n, width + 1)
    body = np.hstack([bundle.features, bundle.labels[:, None]])
    _atomic_write_bytes(path, header + body.astype("<f8").tobytes())


def load_dataset(path) -> DatasetBundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    head_len = struct.calcsize("<8sIQI")
    if len(blob) < head_len:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, version, n, width = struct.unpack_from("<8sIQI", blob)
    if magic != _DATASET_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != _DATASET_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    if width != N_FEATURES + 1:
        raise DatasetFormatError(f"{path}: unexpected row width {width}")
    expected = head_len + n * width * 8
    if len(blob) != expected:
        raise DatasetFormatError(
            f"{path}: size {len(blob)} does not match header ({expected} expected)"
        )
    rows = np.frombuffer(blob, dtype="<f8", offset=head_len).reshape(n, width)
    return DatasetBundle(rows[:, :N_FEATURES], rows[:, N_FEATURES])


def export_csv(bundle: DatasetBundle, path) -> None:
    """Plain-text dump for inspection; the binary file is the cache."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FEATURE_NAMES + ("voltage_v",))
    for feats, label in zip(bundle.features, bundle.labels):
        writer.writerow([repr(float(v)) for v in feats] + [repr(float(label))])
    _atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


@dataclass(frozen=True)
class ExperimentalSet:
    """A measured (or synthetic) polarization dataset for one device.

    ``points`` maps condition temperature (deg C) to that curve's points;
    ``design_base`` carries the non-temperature design fields.
    """

    id: str
    design_base: CellDesign
    conditions: tuple
    points: dict
    holdout_condition: float

    def __post_init__(self) -> None:
        conditions = tuple(float(t) for t in self.conditions)
        object.__setattr__(self, "conditions", conditions)
        if not conditions:
            raise ValueError("experimental set needs at least one condition")
        if len(set(conditions)) != len(conditions):
            raise ValueError("duplicate condition temperatures")
        if float(self.holdout_condition) not in conditions:
            raise ValueError(
                f"holdout condition {self.holdout_condition} not among {conditions}"
            )
        object.__setattr__(self, "holdout_condition", float(self.holdout_condition))
        pts = {float(t): tuple(v) for t, v in self.points.items()}
        if set(pts) != set(conditions):
            raise ValueError("point lists do not match the condition list")
        for t, curve in pts.items():
            if len(curve) < 3:
                raise ValueError(f"condition {t} has {len(curve)} points; need >= 3")
            for p in curve:
                if not isinstance(p, PolarizationPoint):
                    raise TypeError("points must be PolarizationPoint instances")
        object.__setattr__(self, "points", pts)

    @property
    def mode(self) -> Mode:
        return self.design_base.mode

    def n_points(self) -> int:
        return sum(len(c) for c in self.points.values())

    def design_at(self, temp_c: float) -> CellDesign:
        """The cell design with temperature set to the given condition."""
        return replace(self.design_base, temperature=float(temp_c) + 273.15)

    def condition_bundle(self, temp_c: float) -> DatasetBundle:
        """Feature/label arrays for one condition's curve."""
        temp_c = float(temp_c)
        if temp_c not in self.points:
            raise ValueError(f"no condition at {temp_c} deg C")
        design = self.design_at(temp_c)
        row = [getattr(design, name) for name in DESIGN_VARIABLES]
        curve = self.points[temp_c]
        feats = np.empty((len(curve), N_FEATURES))
        labels = np.empty(len(curve))
        for j, p in enumerate(curve):
            feats[j, :11] = row
            feats[j, 11] = p.current_density
            labels[j] = p.voltage
        return DatasetBundle(feats, labels)


def split_holdout(expset: ExperimentalSet):
    """(train, test) bundles: test is the held-out temperature's curve."""
    train = None
    test = None
    for temp_c in expset.conditions:
        part = expset.condition_bundle(temp_c)
        if temp_c == expset.holdout_condition:
            test = part
        else:
            train = part if train is None else train.concat(part)
    if train is None:
        raise ValueError(
            "holding out the only condition leaves no training data"
        )
    return train, test


_METADATA_TO_DESIGN = {
    "s_h2": "s_h2",
    "s_o2": "s_o2",
    "pressure_atm": "pressure",
    "iec_mem": "iec_mem",
    "iec_io": "iec_io",
    "delta_mem_cm": "delta_mem",
    "delta_io_cm": "delta_io",
    "co_h2_ratio": "co_h2_ratio",
    "load_an": "load_anode",
    "load_cat": "load_cathode",
}


def _parse_value(text: str, key: str, where: str) -> float:
    text = text.strip()
    if text.lower() in ("n/a", "na", "-", ""):
        return 0.0  # recorded as "not applicable"; drops the matching term
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{where}: non-numeric value {text!r} for {key}") from None


def load_experimental_csv(path) -> ExperimentalSet:
    """Parse one experimental dataset file (see the package README).

    Layout: `key,value` metadata lines covering the design and holdout
    temperature, then a `temp_c,current_a_cm2,voltage_v` data block.
    """
    meta = {}
    curves: dict = {}
    state = "meta"
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            where = f"{path}:{lineno}"
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            cells = [c.strip() for c in row]
            if state == "meta":
                if cells[:3] == list(_CSV_DATA_HEADER):
                    missing = [k for k in _CSV_METADATA_KEYS if k not in meta]
                    if missing:
                        raise ParseError(f"{where}: missing metadata key(s) {missing}")
                    state = "data"
                    continue
                if len(cells) != 2:
                    raise ParseError(f"{where}: expected 'key,value', got {row!r}")
                key, value = cells
                if key not in _CSV_METADATA_KEYS:
                    raise ParseError(f"{where}: unknown metadata key {key!r}")
                if key in meta:
                    raise ParseError(f"{where}: duplicate metadata key {key!r}")
                meta[key] = (value, where)
            else:
                if len(cells) != 3:
                    raise ParseError(f"{where}: expected 3 data columns, got {row!r}")
                temp_c = _parse_value(cells[0], "temp_c", where)
                current = _parse_value(cells[1], "current_a_cm2", where)
                voltage = _parse_value(cells[2], "voltage_v", where)
                try:
                    point = PolarizationPoint(current, voltage)
                except ValueError as exc:
                    raise ParseError(f"{where}: {exc}") from None
                curves.setdefault(temp_c, []).append(point)
    if state == "meta":
        raise ParseError(f"{path}: no '{','.join(_CSV_DATA_HEADER)}' data block")
    if not curves:
        raise ParseError(f"{path}: data block has no points")

    mode_text, mode_where = meta["mode"]
    try:
        mode = Mode.from_string(mode_text)
    except ValueError as exc:
        raise ParseError(f"{mode_where}: {exc}") from None
    design_kwargs = {"mode": mode}
    for key, field_name in _METADATA_TO_DESIGN.items():
        value, where = meta[key]
        design_kwargs[field_name] = _parse_value(value, key, where)
    conditions = tuple(sorted(curves))
    holdout_text, holdout_where = meta["holdout_temp_c"]
    holdout = _parse_value(holdout_text, "holdout_temp_c", holdout_where)
    design_kwargs["temperature"] = conditions[0] + 273.15
    try:
        design = CellDesign(**design_kwargs)
        return ExperimentalSet(
            id=meta["id"][0],
            design_base=design,
            conditions=conditions,
            points={t: tuple(c) for t, c in curves.items()},
            holdout_condition=holdout,
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_experimental_csv(expset: ExperimentalSet, path) -> None:
    """Inverse of load_experimental_csv, used to ship synthetic targets."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    design = expset.design_base

    def fmt(value: float) -> str:
        return "n/a" if value == 0.0 else repr(float(value))

    writer.writerow(["id", expset.id])
    writer.writerow(["mode", design.mode.value])
    writer.writerow(["s_h2", repr(design.s_h2)])
    writer.writerow(["s_o2", fmt(design.s_o2)])
    writer.writerow(["pressure_atm", repr(design.pressure)])
    writer.writerow(["iec_mem", fmt(design.iec_mem)])
    writer.writerow(["iec_io", fmt(design.iec_io)])
    writer.writerow(["delta_mem_cm", repr(design.delta_mem)])
    writer.writerow(["delta_io_cm", fmt(design.delta_io)])
    writer.writerow(["co_h2_ratio", repr(design.co_h2_ratio)])
    writer.writerow(["load_an", repr(design.load_anode)])
    writer.writerow(["load_cat", repr(design.load_cathode)])
    writer.writerow(["holdout_temp_c", repr(expset.holdout_condition)])
    writer.writerow(_CSV_DATA_HEADER)
    for temp_c in expset.conditions:
        for p in expset.points[temp_c]:
            writer.writerow(
                [repr(float(temp_c)), repr(p.current_density), repr(p.voltage)]
            )
    _atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def default_source_bundle(
    params: PhysicsParams | None = None, n_points: int = 5
) -> DatasetBundle:
    """The canonical source dataset (factorial box, default constants)."""
    spec = FactorialSpec()
    return build_source_dataset(
        generate_factorial(spec), n_points, params or PhysicsParams()
    )
