"""End-to-end command-line pipeline tests (in-process, tiny workloads)."""

import hashlib
import json

import pytest

from echemfsl.cli import main
from echemfsl.dataset import (
    fit_standardizer,
    load_dataset,
    write_experimental_csv,
    write_standardizer,
)
from echemfsl.netcore import load_model
from echemfsl.synthetic import (
    fuel_cell_family,
    synthetic_fuel_cell_target,
    synthetic_pump_target,
)

TINY_LEVELS = {
    "levels_s_h2": "1, 2",
    "levels_s_o2": "2",
    "levels_temperature": "423, 503",
    "levels_pressure": "1.5",
    "levels_iec_mem": "2.25",
    "levels_iec_io": "2.25",
    "levels_delta_mem": "0.005",
    "levels_delta_io": "1e-4",
    "levels_co_h2_ratio": "0",
    "levels_load_anode": "0.35",
    "levels_load_cathode": "0.35",
}


def write_cfg(path, **kv):
    lines = [f"{key} = {value}" for key, value in kv.items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text())


def run_generate(tmp, tag, extra_argv=(), n_points=3):
    run_dir = tmp / tag
    cfg = write_cfg(tmp / f"{tag}.cfg", run_dir=run_dir, name="tiny",
                    n_points=n_points, **TINY_LEVELS)
    rc = main(["generate", cfg, *extra_argv])
    return rc, run_dir


# -------------------------------------------------------------- generate

def test_generate_writes_dataset_and_manifest(tmp_path):
    rc, run_dir = run_generate(tmp_path, "g1")
    assert rc == 0
    bundle = load_dataset(run_dir / "tiny.dat")
    assert len(bundle) == 2 * 2 * 3  # 4 designs x 3 currents

    manifest = read_manifest(run_dir)
    assert manifest["command"] == "generate"
    assert manifest["seeds"] == {"seed": 0, "subsample": None}
    assert set(manifest["outputs"]) == {"tiny.dat", "tiny.standardizer.json"}
    for fname, recorded in manifest["outputs"].items():
        assert recorded == sha256(run_dir / fname)


def test_generate_rerun_byte_identical(tmp_path):
    _, dir_a = run_generate(tmp_path, "a")
    _, dir_b = run_generate(tmp_path, "b")
    assert (dir_a / "tiny.dat").read_bytes() == (dir_b / "tiny.dat").read_bytes()
    assert (dir_a / "tiny.standardizer.json").read_bytes() == \
        (dir_b / "tiny.standardizer.json").read_bytes()


def test_generate_subsample_seeded(tmp_path):
    rc, dir_a = run_generate(tmp_path, "s1", ["--subsample", "8", "--seed", "3"])
    assert rc == 0
    assert len(load_dataset(dir_a / "tiny.dat")) == 8
    _, dir_b = run_generate(tmp_path, "s2", ["--subsample", "8", "--seed", "3"])
    assert (dir_a / "tiny.dat").read_bytes() == (dir_b / "tiny.dat").read_bytes()
    assert read_manifest(dir_a)["seeds"] == {"seed": 3, "subsample": 8}


def test_generate_bad_level_value_exits_2(tmp_path, capsys):
    levels = dict(TINY_LEVELS, levels_s_h2="one, two")
    cfg = write_cfg(tmp_path / "bad.cfg", run_dir=tmp_path / "bad", **levels)
    assert main(["generate", cfg]) == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "bad" / "tiny.dat").exists()


def test_generate_unknown_key_exits_2(tmp_path):
    cfg = write_cfg(tmp_path / "u.cfg", run_dir=tmp_path / "u",
                    typo_key="1", **TINY_LEVELS)
    assert main(["generate", cfg]) == 2


def test_generate_missing_run_dir_key_exits_2(tmp_path):
    cfg = write_cfg(tmp_path / "m.cfg", **TINY_LEVELS)
    assert main(["generate", cfg]) == 2


def test_generate_unwritable_run_dir_exits_2(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory\n")
    cfg = write_cfg(tmp_path / "w.cfg", run_dir=blocker / "sub", **TINY_LEVELS)
    assert main(["generate", cfg]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["generate", str(tmp_path / "absent.cfg")]) == 2


# --------------------------------------------------------------- pretrain

@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """generate -> pretrain once; later stages reuse the artifacts."""
    tmp = tmp_path_factory.mktemp("cli_pipeline")
    rc, data_dir = run_generate(tmp, "data")
    assert rc == 0

    train_dir = tmp / "train"
    cfg = write_cfg(tmp / "pretrain.cfg", run_dir=train_dir,
                    dataset=data_dir / "tiny.dat",
                    standardizer=data_dir / "tiny.standardizer.json",
                    arch="fcnet", lr0="3e-3", batch_size=8, epochs=5,
                    seed=0, name="src")
    assert main(["pretrain", cfg]) == 0

    mea_csv = tmp / "mea.csv"
    write_experimental_csv(synthetic_fuel_cell_target(4), mea_csv)
    pump_csv = tmp / "pump.csv"
    write_experimental_csv(synthetic_pump_target(4), pump_csv)
    return {
        "tmp": tmp,
        "data_dir": data_dir,
        "train_dir": train_dir,
        "source": train_dir / "src.ecm",
        "mea_csv": mea_csv,
        "pump_csv": pump_csv,
    }


def test_pretrain_outputs(pipeline):
    model = load_model(pipeline["source"])
    assert model.arch == "fcnet"
    assert model.standardizer is not None
    assert model.provenance.startswith("pretrain arch=fcnet")

    history = json.loads((pipeline["train_dir"] / "src.history.json").read_text())
    assert len(history["train_loss"]) == 5
    assert len(history["eval_loss"]) == 5

    manifest = read_manifest(pipeline["train_dir"])
    assert manifest["command"] == "pretrain"
    assert set(manifest["outputs"]) == {"src.ecm", "src.history.json"}
    # inputs were hashed against the generate manifest
    assert any(p.endswith("tiny.dat") for p in manifest["inputs"])


def test_pretrain_seed_flag_wins(pipeline):
    tmp = pipeline["tmp"]
    run_dir = tmp / "train_seeded"
    cfg = write_cfg(tmp / "pretrain_seeded.cfg", run_dir=run_dir,
                    dataset=pipeline["data_dir"] / "tiny.dat",
                    standardizer=pipeline["data_dir"] / "tiny.standardizer.json",
                    arch="fcnet", lr0="3e-3", batch_size=8, epochs=1,
                    seed=0, name="s")
    assert main(["pretrain", cfg, "--seed", "7"]) == 0
    assert read_manifest(run_dir)["seeds"] == {"seed": 7}
    assert "seed=7" in load_model(run_dir / "s.ecm").provenance


def test_pretrain_rejects_stale_dataset(pipeline, tmp_path, capsys):
    rc, data_dir = run_generate(tmp_path, "fresh")
    assert rc == 0
    blob = bytearray((data_dir / "tiny.dat").read_bytes())
    blob[-1] ^= 0xFF
    (data_dir / "tiny.dat").write_bytes(blob)

    cfg = write_cfg(tmp_path / "stale.cfg", run_dir=tmp_path / "stale",
                    dataset=data_dir / "tiny.dat",
                    standardizer=data_dir / "tiny.standardizer.json",
                    arch="fcnet", epochs=1)
    assert main(["pretrain", cfg]) == 1
    assert "does not match the manifest" in capsys.readouterr().err


def test_pretrain_missing_dataset_exits_2(pipeline, tmp_path):
    cfg = write_cfg(tmp_path / "gone.cfg", run_dir=tmp_path / "gone",
                    dataset=tmp_path / "no_such.dat",
                    standardizer=pipeline["data_dir"] / "tiny.standardizer.json",
                    arch="fcnet")
    assert main(["pretrain", cfg]) == 2


# ------------------------------------------------------ finetune / newtask

def run_finetune(pipeline, tag, extra_argv=(), **cfg_extra):
    tmp = pipeline["tmp"]
    run_dir = tmp / tag
    settings = dict(run_dir=run_dir, source=pipeline["source"],
                    target=pipeline["mea_csv"], scheme="[1e-6, 2e-4]",
                    batch_size=5, epochs=8, seed=0)
    settings.update(cfg_extra)
    cfg = write_cfg(tmp / f"{tag}.cfg", **settings)
    rc = main(["finetune", cfg, *extra_argv])
    return rc, run_dir


def test_finetune_outputs_and_determinism(pipeline):
    rc, dir_a = run_finetune(pipeline, "ft_a")
    assert rc == 0
    model_path = dir_a / "finetune_SYN-MEA0.ecm"
    model = load_model(model_path)
    assert "finetune target=SYN-MEA0" in model.provenance

    lines = (dir_a / "finetune_runs.jsonl").read_text().splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["run"] == "finetune"
    assert record["scheme"] == "[1e-06, 0.0002]"
    assert record["epochs_requested"] == 8
    assert "holdout_rrmse_percent" in record["metrics"]

    manifest = read_manifest(dir_a)
    assert set(manifest["outputs"]) == {"finetune_SYN-MEA0.ecm",
                                        "finetune_runs.jsonl"}

    rc, dir_b = run_finetune(pipeline, "ft_b")
    assert rc == 0
    assert model_path.read_bytes() == \
        (dir_b / "finetune_SYN-MEA0.ecm").read_bytes()
    assert (dir_a / "finetune_runs.jsonl").read_bytes() == \
        (dir_b / "finetune_runs.jsonl").read_bytes()


def test_finetune_parallel_jobs_match_serial(pipeline):
    tmp = pipeline["tmp"]
    family = fuel_cell_family(4)[:2]
    paths = []
    for expset in family:
        path = tmp / f"{expset.id}.csv"
        write_experimental_csv(expset, path)
        paths.append(str(path))
    targets = ", ".join(paths)

    outputs = {}
    for tag, jobs in (("serial", "1"), ("parallel", "2")):
        run_dir = tmp / f"multi_{tag}"
        cfg = write_cfg(tmp / f"multi_{tag}.cfg", run_dir=run_dir,
                        source=pipeline["source"], targets=targets,
                        scheme="[1e-6, 2e-4]", batch_size=5, epochs=6, seed=0)
        assert main(["finetune", cfg, "--jobs", jobs]) == 0
        outputs[tag] = run_dir
    for expset in family:
        name = f"finetune_{expset.id}.ecm"
        assert (outputs["serial"] / name).read_bytes() == \
            (outputs["parallel"] / name).read_bytes()
    assert (outputs["serial"] / "finetune_runs.jsonl").read_bytes() == \
        (outputs["parallel"] / "finetune_runs.jsonl").read_bytes()


def test_finetune_target_and_targets_exclusive(pipeline):
    rc, _ = run_finetune(pipeline, "ft_both", targets=pipeline["mea_csv"])
    assert rc == 2


def test_finetune_bad_scheme_exits_2(pipeline):
    rc, _ = run_finetune(pipeline, "ft_scheme", scheme="[1e-3]")
    assert rc == 2


def test_finetune_missing_scheme_exits_2(pipeline):
    tmp = pipeline["tmp"]
    cfg = write_cfg(tmp / "ns.cfg", run_dir=tmp / "ns",
                    source=pipeline["source"], target=pipeline["mea_csv"])
    assert main(["finetune", cfg]) == 2


def test_newtask_rejects_fuel_cell_target(pipeline, capsys):
    tmp = pipeline["tmp"]
    cfg = write_cfg(tmp / "nt_fc.cfg", run_dir=tmp / "nt_fc",
                    source=pipeline["source"], target=pipeline["mea_csv"],
                    scheme="[4e-4, 1e-2, 6e-2]", batch_size=16, epochs=4)
    assert main(["newtask", cfg]) == 1
    assert "pump" in capsys.readouterr().err


def test_newtask_pump_target(pipeline):
    tmp = pipeline["tmp"]
    run_dir = tmp / "nt_pump"
    cfg = write_cfg(tmp / "nt_pump.cfg", run_dir=run_dir,
                    source=pipeline["source"], target=pipeline["pump_csv"],
                    scheme="[4e-4, 1e-2, 6e-2]", batch_size=16, epochs=6,
                    seed=1)
    assert main(["newtask", cfg]) == 0
    model = load_model(run_dir / "newtask_SYN-ECHP1.ecm")
    assert model.arch == "fcnet+newtask"
    assert "extend hidden=32" in model.provenance
    assert "newtask target=SYN-ECHP1" in model.provenance
    record = json.loads((run_dir / "newtask_runs.jsonl").read_text())
    assert record["run"] == "newtask"


# --------------------------------------------------------------- evaluate

def test_evaluate_table_report_and_plot(pipeline, capsys):
    tmp = pipeline["tmp"]
    rc, ft_dir = run_finetune(pipeline, "ft_eval")
    assert rc == 0
    run_dir = tmp / "eval"
    cfg = write_cfg(tmp / "eval.cfg", run_dir=run_dir,
                    model=ft_dir / "finetune_SYN-MEA0.ecm",
                    target=pipeline["mea_csv"], plot="true", name="eval1")
    assert main(["evaluate", cfg]) == 0

    out = capsys.readouterr().out
    assert "(testing)" in out
    assert "[1e-06, 0.0002]" in out  # scheme column from provenance
    assert "SYN-MEA0" in out

    payload = json.loads((run_dir / "eval1.json").read_text())
    reports = payload["reports"]
    target = synthetic_fuel_cell_target(4)
    assert [r["condition_temp_c"] for r in reports] == list(target.conditions)
    assert sum(r["is_holdout"] for r in reports) == 1

    svg = (run_dir / "eval1.svg").read_bytes()
    assert svg.startswith(b"<?xml") and b"<svg" in svg
    csv_lines = (run_dir / "eval1.csv").read_text().splitlines()
    assert csv_lines[0] == "series,current_a_cm2,voltage_v"
    assert set(read_manifest(run_dir)["outputs"]) == \
        {"eval1.json", "eval1.svg", "eval1.csv"}


def test_evaluate_unknown_key_exits_2(pipeline, tmp_path):
    cfg = write_cfg(tmp_path / "e.cfg", run_dir=tmp_path / "e",
                    model=pipeline["source"], target=pipeline["mea_csv"],
                    stray="1")
    assert main(["evaluate", cfg]) == 2


# -------------------------------------------------------------- dispersion

def test_dispersion_report(pipeline, tmp_path, capsys):
    tmp = pipeline["tmp"]
    std_path = tmp_path / "std.json"
    bundle = load_dataset(pipeline["data_dir"] / "tiny.dat")
    write_standardizer(fit_standardizer(bundle), std_path)

    run_dir = tmp_path / "disp"
    cfg = write_cfg(tmp_path / "disp.cfg", run_dir=run_dir,
                    targets=f"{pipeline['mea_csv']}, {pipeline['pump_csv']}",
                    standardizer=std_path, name="disp")
    assert main(["dispersion", cfg]) == 0

    values = json.loads((run_dir / "disp.json").read_text())
    assert set(values) == {"SYN-MEA0", "SYN-ECHP1"}
    assert all(0.0 <= v <= 2.0 for v in values.values())
    out = capsys.readouterr().out
    assert "dispersion SYN-ECHP1" in out and "dispersion SYN-MEA0" in out

    run_dir2 = tmp_path / "disp2"
    cfg2 = write_cfg(tmp_path / "disp2.cfg", run_dir=run_dir2,
                     targets=f"{pipeline['mea_csv']}, {pipeline['pump_csv']}",
                     standardizer=std_path, name="disp")
    assert main(["dispersion", cfg2]) == 0
    assert (run_dir / "disp.json").read_bytes() == \
        (run_dir2 / "disp.json").read_bytes()
