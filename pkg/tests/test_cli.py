import csv
import filecmp
import json
import os

import numpy as np
import pytest

from morphtransfer import cli, dynamics, transfer
from morphtransfer.cli import (
    ExperimentConfig,
    config_snapshot,
    list_experiments,
    load_experiment,
    parse_config,
    run,
)
from morphtransfer.errors import ConfigError


MINIMAL = {
    "experiment": "mini",
    "source_morphology": "three_link",
    "target_morphology": "four_link",
    "task": "button_press",
    "proxy_tasks": ["reach"],
}


def smoke_config(**overrides):
    doc = {
        **MINIMAL,
        "experiment": "smoke",
        "iterations": 2,
        "proxy_iterations": 2,
        "source_iterations": 2,
        "samples_per_iter": 3,
        "embed_epochs": 10,
        "source_horizon": 30,
        "target_horizon": 30,
        "methods": ["invariant"],
    }
    doc.update(overrides)
    return doc


# ---------------------------------------------------------------------------
# parsing


def test_parse_minimal_config_populates_defaults():
    config = parse_config(json.dumps(MINIMAL))
    assert config.alignment == "time"
    assert config.methods == ("invariant", "none")
    assert config.alpha0 == 1.0
    assert config.decay == "none"
    assert config.iterations == 25
    assert config.seed == 0
    assert config.source_horizon == config.target_horizon == 100
    assert config.feature_dim == 6


def test_parse_reports_all_violations():
    doc = {**MINIMAL, "task": "juggling", "alpha0": -2, "mystery_knob": 1,
           "methods": ["invariant", "telepathy"]}
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    text = "\n".join(info.value.violations)
    assert "juggling" in text
    assert "alpha0" in text
    assert "mystery_knob" in text
    assert "telepathy" in text
    assert len(info.value.violations) >= 4


def test_parse_horizon_mismatch_names_both_fields():
    doc = {**MINIMAL, "source_horizon": 100, "target_horizon": 80}
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    joined = " ".join(info.value.violations)
    assert "source_horizon" in joined and "target_horizon" in joined


def test_parse_syntax_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n "experiment": "x",\n broken\n}')
    assert "line 3" in str(info.value)


def test_parse_rejects_empty_proxies_for_real_methods():
    doc = {**MINIMAL, "proxy_tasks": [], "methods": ["invariant"]}
    with pytest.raises(ConfigError):
        parse_config(json.dumps(doc))
    ok = parse_config(json.dumps({**MINIMAL, "proxy_tasks": [],
                                  "methods": ["none"]}))
    assert ok.methods == ("none",)


def test_snapshot_roundtrip():
    config = parse_config(json.dumps(smoke_config()))
    again = parse_config(config_snapshot(config))
    assert again == config


# ---------------------------------------------------------------------------
# catalog


def test_catalog_has_at_least_five_entries():
    assert len(list_experiments()) >= 5


def test_catalog_entries_all_parse():
    for name, doc in list_experiments().items():
        config = parse_config(json.dumps(doc))
        assert config.experiment == name


def test_catalog_morphologies_match_experiment_descriptions():
    catalog = list_experiments()
    # both shipped transfers start from the 3-link torque arm
    assert catalog["button_3to4"]["source_morphology"] == "three_link"
    assert catalog["button_3to4"]["target_morphology"] == "four_link"
    assert catalog["button_3to4"]["task"] == "button_press"
    assert catalog["tendon_block_pull"]["source_morphology"] == "three_link"
    assert catalog["tendon_block_pull"]["target_morphology"] == "tendon_three_link"
    assert catalog["tendon_block_pull"]["task"] == "block_pull"
    assert catalog["tendon_block_pull"]["decay"] == "linear_to_zero"
    # proxy ablations cover the three proxy tasks
    assert catalog["button_3to4_proxy_reach"]["proxy_tasks"] == ["reach"]
    assert catalog["button_3to4_proxy_push"]["proxy_tasks"] == ["block_move"]
    assert catalog["button_3to4_proxy_peg"]["proxy_tasks"] == ["peg_insert"]
    assert catalog["button_3to4"]["proxy_tasks"] == [
        "reach", "block_move", "peg_insert"
    ]


def test_load_experiment_unknown_name():
    with pytest.raises(ConfigError):
        load_experiment("does_not_exist")


# ---------------------------------------------------------------------------
# running


def test_run_unknown_method_override_fails_before_simulation(tmp_path):
    config = parse_config(json.dumps(smoke_config()))
    with pytest.raises(ConfigError):
        run(config, out_dir=str(tmp_path / "x"), methods=["warp_drive"])


def test_run_writes_summary_and_curves(tmp_path):
    config = parse_config(json.dumps(smoke_config(methods=["random_proj", "none"])))
    status, out = run(config, out_dir=str(tmp_path / "arts"))
    assert status == 0
    with open(os.path.join(out, "summary.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["random_proj", "none"]
    for row in rows:
        best = float(row["best_success"])
        assert 0.0 <= best <= 1.0
        with open(os.path.join(out, "curves", f"{row['method']}.csv")) as fh:
            curve = [float(r["success_rate"]) for r in csv.DictReader(fh)]
        assert best == max(curve)
        assert len(curve) == config.iterations
    snap = json.loads((tmp_path / "arts" / "config.snapshot").read_text())
    assert snap["methods"] == ["random_proj", "none"]


def test_run_seed_and_out_overrides(tmp_path):
    config = parse_config(json.dumps(smoke_config(methods=["none"])))
    status, out = run(config, out_dir=str(tmp_path / "o"), seed=123)
    assert status == 0
    snap = json.loads((tmp_path / "o" / "config.snapshot").read_text())
    assert snap["seed"] == 123


def _dir_files(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            path = os.path.join(base, f)
            out[os.path.relpath(path, root)] = open(path, "rb").read()
    return out


def test_repeated_runs_byte_identical(tmp_path):
    config = parse_config(json.dumps(smoke_config(methods=["random_proj"])))
    _, out1 = run(config, out_dir=str(tmp_path / "a"))
    _, out2 = run(config, out_dir=str(tmp_path / "b"))
    files1 = _dir_files(out1)
    files2 = _dir_files(out2)
    assert set(files1) == set(files2)
    mismatched = [
        f for f in files1
        if f != "config.snapshot" and files1[f] != files2[f]
    ]
    assert mismatched == []
    # snapshots differ only in out_dir
    s1 = json.loads(files1["config.snapshot"])
    s2 = json.loads(files2["config.snapshot"])
    s1.pop("out_dir")
    s2.pop("out_dir")
    assert s1 == s2


# ---------------------------------------------------------------------------
# command line entry


def test_main_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "button_3to4" in out and "tendon_block_pull" in out


def test_main_run_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(smoke_config(methods=["none"])))
    status = cli.main(["run", str(path), "--out", str(tmp_path / "res")])
    assert status == 0
    assert (tmp_path / "res" / "summary.csv").exists()


def test_main_validation_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**MINIMAL, "task": "juggling"}))
    assert cli.main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "juggling" in err


def test_main_methods_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(smoke_config(methods=["invariant"])))
    status = cli.main([
        "run", str(path), "--out", str(tmp_path / "res"), "--methods", "none",
    ])
    assert status == 0
    with open(tmp_path / "res" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["none"]
