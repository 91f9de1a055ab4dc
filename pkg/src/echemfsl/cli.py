"""Command-line pipeline: generate, pretrain, finetune, newtask, evaluate,
dispersion.

Every command reads one flat ``name = value`` config file, writes all of
its artifacts into the config's ``run_dir``, and finishes by writing a
``manifest.json`` listing each produced file with its sha256.  Numeric
settings live in the config; flags cover only seeds, subsampling, and
worker count, so a config plus a manifest is enough to regenerate any
artifact byte-identically.

Inputs that sit next to a manifest are checked against it before a run
starts; a hash mismatch means some upstream artifact was regenerated and
this run would silently mix generations, so the command refuses.

Exit codes: 0 success, 1 runtime or numeric failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .config import ConfigError, read_kv_file
from .dataset import (
    DESIGN_VARIABLES,
    DatasetFormatError,
    FactorialSpec,
    ParseError,
    apply_standardizer,
    build_source_dataset,
    fit_standardizer,
    generate_factorial,
    load_dataset,
    load_experimental_csv,
    load_standardizer,
    write_dataset,
    write_standardizer,
)
from .metrics import (
    cosine_dispersion,
    evaluate_all,
    export_curve_plot,
    predict_curve,
)
from .netcore import (
    ModelFormatError,
    TrainingDivergedError,
    load_model,
    save_model,
)
from .physics import PhysicsParams, PolarizationPoint
from .metrics import evaluate_holdout
from .transfer import (
    LRScheme,
    TransferRun,
    finetune,
    new_task_train,
    pretrain_source,
    provenance_record,
)

MANIFEST_NAME = "manifest.json"


class StaleInputError(RuntimeError):
    """An input file no longer matches the manifest that produced it."""


# --------------------------------------------------------------------------
# config access

_REQUIRED = object()


class _Config:
    """Typed, consumption-tracked view of a flat key-value file."""

    def __init__(self, path: str):
        self.path = str(path)
        self._data = read_kv_file(path)
        self._used: set = set()

    def _raw(self, key: str, default):
        self._used.add(key)
        if key in self._data:
            return self._data[key]
        if default is _REQUIRED:
            raise ConfigError(f"{self.path}: missing required key '{key}'")
        return None

    def str_(self, key: str, default=_REQUIRED):
        raw = self._raw(key, default)
        return default if raw is None else raw

    def float_(self, key: str, default=_REQUIRED):
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: key '{key}': {exc}") from exc

    def int_(self, key: str, default=_REQUIRED):
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: key '{key}': {exc}") from exc

    def bool_(self, key: str, default=_REQUIRED):
        raw = self._raw(key, default)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError(f"{self.path}: key '{key}': not a boolean: {raw!r}")

    def paths(self, key: str, default=_REQUIRED):
        raw = self._raw(key, default)
        if raw is None:
            return default
        items = [part.strip() for part in raw.split(",")]
        items = [part for part in items if part]
        if not items:
            raise ConfigError(f"{self.path}: key '{key}': empty list")
        return items

    def floats(self, key: str, default=_REQUIRED):
        items = self.paths(key, default)
        if items is default:
            return default
        try:
            return tuple(float(part) for part in items)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: key '{key}': {exc}") from exc

    def finish(self) -> None:
        leftover = sorted(set(self._data) - self._used)
        if leftover:
            raise ConfigError(
                f"{self.path}: unknown key(s): {', '.join(leftover)}"
            )


def _run_dir(cfg: _Config) -> str:
    run_dir = os.path.abspath(cfg.str_("run_dir"))
    try:
        os.makedirs(run_dir, exist_ok=True)
        probe = os.path.join(run_dir, ".writable")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"run_dir not writable: {exc}") from exc
    return run_dir


# --------------------------------------------------------------------------
# manifests

@dataclass
class RunManifest:
    command: str
    config_path: str
    config_sha256: str
    seeds: dict
    inputs: dict
    outputs: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    artifact_version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _verify_inputs(paths) -> dict:
    """Hash each input; cross-check any sibling manifest (staleness guard)."""
    hashes: dict = {}
    for path in paths:
        path = os.path.abspath(path)
        if not os.path.isfile(path):
            raise ConfigError(f"input not found: {path}")
        actual = _sha256_file(path)
        hashes[path] = actual
        sibling = os.path.join(os.path.dirname(path), MANIFEST_NAME)
        if not os.path.isfile(sibling):
            print(f"note: no manifest beside {path}; chain not checked",
                  file=sys.stderr)
            continue
        try:
            with open(sibling, "rb") as fh:
                recorded = json.loads(fh.read()).get("outputs", {})
        except (OSError, json.JSONDecodeError) as exc:
            raise StaleInputError(f"{sibling}: unreadable manifest: {exc}") from exc
        expected = recorded.get(os.path.basename(path))
        if expected is not None and expected != actual:
            raise StaleInputError(
                f"{path} does not match the manifest that produced it "
                f"(expected {expected[:12]}…, found {actual[:12]}…); "
                f"regenerate downstream artifacts in order"
            )
    return hashes


def _finish_manifest(manifest: RunManifest, run_dir: str, outputs,
                     t_start: float) -> None:
    for path in outputs:
        manifest.outputs[os.path.basename(path)] = _sha256_file(path)
    manifest.wall_clock_s = round(time.time() - t_start, 3)
    payload = manifest.to_json().encode()
    tmp = os.path.join(run_dir, f".{MANIFEST_NAME}.tmp.{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, os.path.join(run_dir, MANIFEST_NAME))


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "unnamed"


# --------------------------------------------------------------------------
# generate

def cmd_generate(args) -> int:
    t0 = time.time()
    cfg = _Config(args.config)
    run_dir = _run_dir(cfg)
    name = _safe_name(cfg.str_("name", "source"))
    n_points = cfg.int_("n_points", 5)
    params_path = cfg.str_("params", None)

    overrides = {}
    for var in DESIGN_VARIABLES:
        levels = cfg.floats(f"levels_{var}", None)
        if levels is not None:
            overrides[var] = levels
    cfg.finish()

    params = PhysicsParams.from_config(params_path) if params_path else PhysicsParams()
    spec = FactorialSpec(**overrides)
    designs = generate_factorial(spec)
    bundle = build_source_dataset(designs, n_points=n_points, params=params)
    n_full = len(bundle)
    if args.subsample is not None:
        if args.subsample < 2:
            raise ConfigError("--subsample must be >= 2")
        bundle = bundle.subsample(args.subsample, seed=args.seed)
    standardizer = fit_standardizer(bundle)

    dataset_path = os.path.join(run_dir, f"{name}.dat")
    std_path = os.path.join(run_dir, f"{name}.standardizer.json")
    write_dataset(bundle, dataset_path)
    write_standardizer(standardizer, std_path)

    manifest = RunManifest(
        command="generate",
        config_path=os.path.abspath(args.config),
        config_sha256=_sha256_file(args.config),
        seeds={"seed": args.seed, "subsample": args.subsample},
        inputs=_verify_inputs([params_path] if params_path else []),
    )
    _finish_manifest(manifest, run_dir, [dataset_path, std_path], t0)
    print(f"generate: {len(designs)} designs, {n_full} records"
          + (f", kept {len(bundle)}" if args.subsample else "")
          + f" -> {dataset_path}")
    return 0


# --------------------------------------------------------------------------
# pretrain

def cmd_pretrain(args) -> int:
    t0 = time.time()
    cfg = _Config(args.config)
    run_dir = _run_dir(cfg)
    dataset_path = cfg.str_("dataset")
    std_path = cfg.str_("standardizer")
    arch = cfg.str_("arch")
    lr0 = cfg.float_("lr0", 1e-3)
    batch_size = cfg.int_("batch_size", 128)
    epochs = cfg.int_("epochs", 200)
    seed = cfg.int_("seed", 0)
    if args.seed is not None:
        seed = args.seed
    val_fraction = cfg.float_("val_fraction", 0.1)
    name = _safe_name(cfg.str_("name", f"source_{arch}"))
    cfg.finish()

    inputs = _verify_inputs([dataset_path, std_path])
    bundle = load_dataset(dataset_path)
    standardizer = load_standardizer(std_path)
    model, history = pretrain_source(
        arch, apply_standardizer(standardizer, bundle), lr0=lr0,
        batch_size=batch_size, epochs=epochs, seed=seed,
        val_fraction=val_fraction, standardizer=standardizer,
    )

    model_path = os.path.join(run_dir, f"{name}.ecm")
    history_path = os.path.join(run_dir, f"{name}.history.json")
    save_model(model, model_path)
    with open(history_path, "w") as fh:
        json.dump({"train_loss": history.train_loss,
                   "eval_loss": history.eval_loss}, fh, sort_keys=True)

    manifest = RunManifest(
        command="pretrain",
        config_path=os.path.abspath(args.config),
        config_sha256=_sha256_file(args.config),
        seeds={"seed": seed},
        inputs=inputs,
    )
    _finish_manifest(manifest, run_dir, [model_path, history_path], t0)
    print(f"pretrain: {arch} on {len(bundle)} records, "
          f"final train loss {history.train_loss[-1]:.3e}, "
          f"held-out loss {history.eval_loss[-1]:.3e} -> {model_path}")
    return 0


# --------------------------------------------------------------------------
# finetune / newtask

def _run_transfer_job(job: dict) -> dict:
    """One TransferRun, self-contained so a worker process can run it."""
    source = load_model(job["source"])
    target = load_experimental_csv(job["target"])
    scheme = LRScheme.parse(job["scheme"])
    if job["strategy"] == "newtask":
        model, history = new_task_train(
            source, target, scheme, job["batch_size"],
            epochs=job["epochs"], seed=job["seed"],
        )
    else:
        model, history = finetune(
            source, target, scheme, job["batch_size"],
            epochs=job["epochs"], seed=job["seed"],
        )
    save_model(model, job["out"])
    holdout = evaluate_holdout(model, target)
    run = TransferRun(
        source_path=job["source"], dataset_id=target.id, scheme=scheme,
        batch_size=job["batch_size"], epochs=job["epochs"],
        seed=job["seed"], strategy=job["strategy"],
    )
    line = provenance_record(run, target, history, {
        "final_train_loss": history.train_loss[-1],
        "holdout_rrmse_percent": holdout.rrmse_percent,
    })
    return {
        "out": job["out"],
        "target_id": target.id,
        "epochs_run": history.epochs_run(),
        "stopped_early": history.stopped_early,
        "final_train_loss": history.train_loss[-1],
        "holdout_rrmse_percent": holdout.rrmse_percent,
        "provenance_line": line,
    }


def _cmd_transfer(args, strategy: str) -> int:
    t0 = time.time()
    cfg = _Config(args.config)
    run_dir = _run_dir(cfg)
    source_path = cfg.str_("source")
    targets = cfg.paths("targets", None)
    single = cfg.str_("target", None)
    if targets and single:
        raise ConfigError(f"{cfg.path}: give either 'target' or 'targets', not both")
    if not targets:
        if not single:
            raise ConfigError(f"{cfg.path}: missing required key 'target'")
        targets = [single]
    scheme_text = cfg.str_("scheme")
    batch_size = cfg.int_("batch_size", 5)
    epochs = cfg.int_("epochs", 2000)
    seed = cfg.int_("seed", 0)
    if args.seed is not None:
        seed = args.seed
    cfg.finish()

    LRScheme.parse(scheme_text)  # fail fast on bad scheme
    inputs = _verify_inputs([source_path] + targets)
    jobs = []
    for target_path in targets:
        target_id = load_experimental_csv(target_path).id
        out = os.path.join(run_dir, f"{strategy}_{_safe_name(target_id)}.ecm")
        jobs.append({
            "source": source_path, "target": target_path,
            "scheme": scheme_text, "batch_size": batch_size,
            "epochs": epochs, "seed": seed, "strategy": strategy,
            "out": out,
        })

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_transfer_job, jobs))
    else:
        results = [_run_transfer_job(job) for job in jobs]

    runs_path = os.path.join(run_dir, f"{strategy}_runs.jsonl")
    with open(runs_path, "w") as fh:
        for r in results:
            fh.write(r["provenance_line"] + "\n")

    manifest = RunManifest(
        command=strategy,
        config_path=os.path.abspath(args.config),
        config_sha256=_sha256_file(args.config),
        seeds={"seed": seed},
        inputs=inputs,
    )
    _finish_manifest(manifest, run_dir,
                     [r["out"] for r in results] + [runs_path], t0)
    for r in results:
        tag = " (early stop)" if r["stopped_early"] else ""
        print(f"{strategy}: {r['target_id']} {r['epochs_run']} epochs{tag}, "
              f"holdout rRMSE {r['holdout_rrmse_percent']:.2f}% -> {r['out']}")
    return 0


def cmd_finetune(args) -> int:
    return _cmd_transfer(args, "finetune")


def cmd_newtask(args) -> int:
    return _cmd_transfer(args, "newtask")


# --------------------------------------------------------------------------
# evaluate

_SCHEME_RE = re.compile(r"scheme=(\[[^\]]*\])")
_BATCH_RE = re.compile(r"batch=(\d+)")


def _provenance_fields(provenance: str):
    """Pull display columns out of a model's provenance trail."""
    schemes = _SCHEME_RE.findall(provenance)
    batches = _BATCH_RE.findall(provenance)
    return (schemes[-1] if schemes else "-",
            batches[-1] if batches else "-")


def _format_table(rows, headers) -> str:
    table = [list(headers)]
    table += [[str(row[k]) for k in range(len(headers))] for row in rows]
    widths = [max(len(r[k]) for r in table) for k in range(len(headers))]
    lines = ["  ".join(r[k].ljust(widths[k]) for k in range(len(headers))).rstrip()
             for r in table]
    return "\n".join([lines[0], "-" * len(lines[0])] + lines[1:])


def cmd_evaluate(args) -> int:
    t0 = time.time()
    cfg = _Config(args.config)
    run_dir = _run_dir(cfg)
    model_path = cfg.str_("model")
    target_path = cfg.str_("target")
    plot = cfg.bool_("plot", False)
    name = _safe_name(cfg.str_("name", "eval"))
    cfg.finish()

    inputs = _verify_inputs([model_path, target_path])
    model = load_model(model_path)
    expset = load_experimental_csv(target_path)
    reports = evaluate_all(model, expset)

    scheme, batch = _provenance_fields(model.provenance)
    headers = ["dataset", "base model", "scheme", "batch"]
    for report in reports:
        flag = " (testing)" if report.is_holdout else ""
        headers.append(f"{report.condition_temp_c:g}C{flag}")
    row = {0: expset.id, 1: model.arch, 2: scheme, 3: batch}
    for k, report in enumerate(reports):
        row[4 + k] = f"{report.rrmse_percent:.2f}%"
    table = _format_table([row], headers)
    print(table)

    report_path = os.path.join(run_dir, f"{name}.json")
    with open(report_path, "w") as fh:
        json.dump({"reports": [json.loads(r.to_json()) for r in reports]},
                  fh, sort_keys=True, indent=2)
    outputs = [report_path]

    if plot:
        temp = expset.holdout_condition
        measured_bundle = expset.condition_bundle(temp)
        measured = [
            PolarizationPoint(float(i), float(v))
            for i, v in zip(measured_bundle.features[:, -1], measured_bundle.labels)
        ]
        curve = predict_curve(model, expset.design_at(temp),
                              np.sort(measured_bundle.features[:, -1]))
        svg_path = os.path.join(run_dir, f"{name}.svg")
        csv_path = os.path.join(run_dir, f"{name}.csv")
        export_curve_plot(
            svg_path, csv_path,
            f"{expset.id} at {temp:g} C (held out)",
            measured, curve,
        )
        outputs += [svg_path, csv_path]

    manifest = RunManifest(
        command="evaluate",
        config_path=os.path.abspath(args.config),
        config_sha256=_sha256_file(args.config),
        seeds={},
        inputs=inputs,
    )
    _finish_manifest(manifest, run_dir, outputs, t0)
    return 0


# --------------------------------------------------------------------------
# dispersion

def cmd_dispersion(args) -> int:
    t0 = time.time()
    cfg = _Config(args.config)
    run_dir = _run_dir(cfg)
    targets = cfg.paths("targets")
    std_path = cfg.str_("standardizer", None)
    seed = cfg.int_("seed", 0)
    if args.seed is not None:
        seed = args.seed
    name = _safe_name(cfg.str_("name", "dispersion"))
    cfg.finish()

    inputs = _verify_inputs(targets + ([std_path] if std_path else []))
    standardizer = load_standardizer(std_path) if std_path else None
    values = {}
    for path in targets:
        expset = load_experimental_csv(path)
        features = np.concatenate(
            [expset.condition_bundle(t).features for t in expset.conditions]
        )
        if standardizer is not None:
            features = standardizer.transform_features(features)
        values[expset.id] = cosine_dispersion(features, seed=seed)

    for set_id, value in sorted(values.items()):
        print(f"dispersion {set_id}: {value:.6g}")

    report_path = os.path.join(run_dir, f"{name}.json")
    with open(report_path, "w") as fh:
        json.dump(values, fh, sort_keys=True, indent=2)
    manifest = RunManifest(
        command="dispersion",
        config_path=os.path.abspath(args.config),
        config_sha256=_sha256_file(args.config),
        seeds={"seed": seed},
        inputs=inputs,
    )
    _finish_manifest(manifest, run_dir, [report_path], t0)
    return 0


# --------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echemfsl",
        description="Few-shot polarization modeling pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build the factorial source dataset")
    p.add_argument("config")
    p.add_argument("--subsample", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pretrain", help="train a source model")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, metavar="S")
    p.set_defaults(func=cmd_pretrain)

    for cmd_name, func in (("finetune", cmd_finetune), ("newtask", cmd_newtask)):
        p = sub.add_parser(cmd_name, help=f"{cmd_name} on experimental targets")
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None, metavar="S")
        p.add_argument("--jobs", type=int, default=1, metavar="N")
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="score a model against a target set")
    p.add_argument("config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dispersion", help="cosine dispersion of target sets")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, metavar="S")
    p.set_defaults(func=cmd_dispersion)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StaleInputError, DatasetFormatError, ModelFormatError,
            TrainingDivergedError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
