import csv
import json

import pytest
import yaml

from qdemu import config as cfgmod
from qdemu.cli import main, plan_cases

TINY = {
    "sim": {"N_t": 10},
    "data": {"regime": "barrier", "x0": [30.0], "s0": [2.0], "e0": [3.0, 6.0], "barrier_heights": [5.0]},
    "window": {"spatial_keep_prob": 0.1},
    "train": {"epochs": 1, "batch_size": 64},
    "rollout": {"n_steps": 5},
    "suite": {"name": "free"},
}


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(dict(TINY, output=str(tmp_path / "out"))))
    return path


def test_dry_run_counts_standard_grid(capsys, tmp_path):
    assert run("simulate", "--dry-run", "-o", tmp_path) == 0
    assert "planned 2646 trajectories" in capsys.readouterr().out


def test_unknown_key_is_a_usage_error(capsys, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("train:\n  lr_peek: 0.1\n")
    assert run("simulate", "--dry-run", "-c", path) == 1
    assert "train.lr_peek" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(capsys):
    assert run("train", "--train.bogus", "1") == 1


def test_missing_input_names_the_producer(capsys, tmp_path):
    assert run("curriculum", "-o", tmp_path) == 1
    assert "qdemu simulate" in capsys.readouterr().err
    assert run("train", "-o", tmp_path) == 1
    assert "qdemu curriculum" in capsys.readouterr().err


def test_flags_override_file(tiny):
    cfg = cfgmod.load(tiny, {"train.epochs": "3"})
    assert cfg.train.epochs == 3 and cfg.train.batch_size == 64


def test_snapshot_reproduces_config(tiny, tmp_path):
    cfg = cfgmod.load(tiny)
    snap = cfg.snapshot(tmp_path / "snap")
    assert cfgmod.load(snap) == cfg


def test_subset_is_seeded():
    cfg = cfgmod.from_mapping({"data": {"subset": 300}})
    plan = plan_cases(cfg)
    assert len(plan) == 300
    assert plan == plan_cases(cfg)
    assert plan != plan_cases(cfgmod.from_mapping({"data": {"subset": 300, "subset_seed": 1}}))


def test_pipeline_end_to_end(capsys, tiny, tmp_path):
    out = tmp_path / "out"
    assert run("simulate", "-c", tiny) == 0
    assert run("simulate", "-c", tiny) == 0
    assert "0 to simulate" in capsys.readouterr().out
    assert (out / "trajectories" / "resolved_config.yaml").exists()
    assert run("curriculum", "-c", tiny) == 0
    assert run("train", "-c", tiny, "--model", "linear", "--channels", 3) == 0
    capsys.readouterr()
    assert run("inspect", out / "models" / "linear") == 0
    assert "parameters: 3220" in capsys.readouterr().out
    assert run("evaluate", "-c", tiny, "--oracle") == 0
    rows = list(csv.DictReader((out / "eval" / "oracle" / "metrics.csv").open()))
    assert len(rows) == 13
    assert all(float(r["mean_corr"]) == pytest.approx(1.0, abs=1e-9) for r in rows)
    assert run("evaluate", "-c", tiny, "--model.kind", "linear") == 0
    assert (out / "eval" / "linear" / "curves.csv").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(capsys, tiny):
    assert run("simulate", "-c", tiny) == 0
    assert run("curriculum", "-c", tiny) == 0
    assert run("train", "-c", tiny, "--model", "linear", "--train.lr_peak", "1e30") == 2
    assert "numerical failure" in capsys.readouterr().err


@pytest.mark.slow
def test_reproduce_is_deterministic(tmp_path):
    outputs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump(dict(TINY, output=str(tmp_path / name), suite={"name": "rect"})))
        assert run("reproduce", "table1", "-c", path) == 0
        outputs.append(tmp_path / name)
    a, b = outputs
    assert (a / "table1.csv").read_text() == (b / "table1.csv").read_text()
    for kind in ("linear", "dense", "conv", "gru"):
        assert (a / "eval" / kind / "metrics.csv").read_text() == (b / "eval" / kind / "metrics.csv").read_text()
    table = list(csv.DictReader((a / "table1.csv").open()))
    assert [r["model"] for r in table] == ["linear", "dense", "conv", "gru"]
    assert json.loads(json.dumps(table))[0]["n_params"] == "3220"


@pytest.mark.parametrize("storage", ["lazy", "materialized"])
def test_curriculum_storage_modes(capsys, tiny, tmp_path, storage):
    assert run("simulate", "-c", tiny) == 0
    assert run("curriculum", "-c", tiny, "--data.storage", storage) == 0
    capsys.readouterr()
    assert run("inspect", tmp_path / "out" / "dataset") == 0
    assert f"dataset ({storage})" in capsys.readouterr().out
    assert run("train", "-c", tiny, "--data.storage", storage, "--model", "linear") == 0


def test_bad_storage_value(capsys, tmp_path):
    assert run("simulate", "--dry-run", "-o", tmp_path, "--data.storage", "cloud") == 1
    assert "data.storage" in capsys.readouterr().err
