"""Model files: framed binary with a JSON descriptor and raw f64 blocks.

Layout: 8-byte magic, u32 format version, u64 descriptor length, UTF-8
JSON descriptor (architecture, layer specs, group tags, seed, provenance,
standardizer), then every parameter array in order as little-endian
64-bit floats.  Roundtrips are bit-exact.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..dataset import Standardizer
from .layers import (
    AdaptiveMaxPool1d,
    Conv1d,
    Dense,
    Flatten,
    ParamGroup,
    ReLU,
)
from .network import NetworkModel

_MODEL_MAGIC = b"ECFSLNET"
_MODEL_VERSION = 1
_FRAME = "<8sIQ"


class ModelFormatError(ValueError):
    """Corrupt or incompatible model file."""


_LAYER_KINDS = {
    "Dense": lambda spec, group: Dense(spec["n_in"], spec["n_out"], group),
    "Conv1d": lambda spec, group: Conv1d(
        spec["in_channels"], spec["out_channels"], spec["kernel"],
        spec["stride"], group,
    ),
    "ReLU": lambda spec, group: ReLU(),
    "AdaptiveMaxPool1d": lambda spec, group: AdaptiveMaxPool1d(spec["out_length"]),
    "Flatten": lambda spec, group: Flatten(),
}


def _standardizer_to_json(s: Standardizer | None):
    if s is None:
        return None
    return {
        "mean": [float(v) for v in s.mean],
        "std": [float(v) for v in s.std],
        "label_mean": s.label_mean,
        "label_std": s.label_std,
    }


def _standardizer_from_json(obj) -> Standardizer | None:
    if obj is None:
        return None
    return Standardizer(
        mean=np.asarray(obj["mean"], dtype=float),
        std=np.asarray(obj["std"], dtype=float),
        label_mean=float(obj["label_mean"]),
        label_std=float(obj["label_std"]),
    )


def save_model(model: NetworkModel, path) -> None:
    """Write the model to ``path`` atomically."""
    descriptor = model.describe()
    descriptor["standardizer"] = _standardizer_to_json(model.standardizer)
    descriptor["provenance"] = model.provenance
    header = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    blocks = [np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.parameters()]
    payload = struct.pack(_FRAME, _MODEL_MAGIC, _MODEL_VERSION, len(header))
    payload += header + b"".join(blocks)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def load_model(path) -> NetworkModel:
    """Read a model file back; any structural problem raises ModelFormatError."""
    with open(path, "rb") as fh:
        blob = fh.read()
    frame_len = struct.calcsize(_FRAME)
    if len(blob) < frame_len:
        raise ModelFormatError(f"{path}: truncated frame")
    magic, version, header_len = struct.unpack_from(_FRAME, blob)
    if magic != _MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != _MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    if len(blob) < frame_len + header_len:
        raise ModelFormatError(f"{path}: truncated descriptor")
    try:
        descriptor = json.loads(blob[frame_len:frame_len + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable descriptor ({exc})") from None

    layers = []
    for entry in descriptor.get("layers", []):
        kind = entry.get("kind")
        if kind not in _LAYER_KINDS:
            raise ModelFormatError(f"{path}: unknown layer kind {kind!r}")
        group = ParamGroup(entry["group"]) if entry.get("group") else None
        layers.append(_LAYER_KINDS[kind](entry, group))

    reshape = descriptor.get("reshape_input")
    model = NetworkModel(
        arch=descriptor.get("arch", ""),
        layers=layers,
        seed=int(descriptor.get("seed", 0)),
        reshape_input=tuple(reshape) if reshape else None,
        standardizer=_standardizer_from_json(descriptor.get("standardizer")),
        provenance=descriptor.get("provenance", ""),
    )

    offset = frame_len + header_len
    for p in model.parameters():
        nbytes = p.size * 8
        if offset + nbytes > len(blob):
            raise ModelFormatError(f"{path}: truncated parameter block")
        block = np.frombuffer(blob, dtype="<f8", count=p.size, offset=offset)
        p[...] = block.reshape(p.shape)
        offset += nbytes
    if offset != len(blob):
        raise ModelFormatError(
            f"{path}: {len(blob) - offset} trailing bytes after parameters"
        )
    return model
