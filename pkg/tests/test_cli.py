from __future__ import annotations

import json

import pytest

from blowuplab import cli, experiments
from blowuplab.cli import ConfigError, ExperimentConfig

FAST = ["--param", "fractions=0.5,0.9"]


def report(out, name):
    return json.loads((out / name / "report.json").read_text())


def test_list_catalog(capsys):
    assert cli.main(["list"]) == 0
    first = capsys.readouterr().out
    cli.main(["list"])
    assert capsys.readouterr().out == first
    entries = experiments.list_experiments()
    assert len(entries) >= 10
    assert all(e["anchor"] and e["description"] for e in entries)
    assert len(first.strip().splitlines()) == len(entries)


def test_every_criterion_has_exactly_one_entry():
    names = list(experiments.ACCEPTANCE.values())
    assert sorted(experiments.ACCEPTANCE) == list(range(1, 12))
    assert len(set(names)) == len(names)
    assert all(n in experiments.CATALOG for n in names)


def test_empty_config_lists_missing_fields():
    with pytest.raises(ConfigError, match="experiment, out"):
        ExperimentConfig.from_mapping({})


def test_empty_run_is_rejected(capsys):
    assert cli.main(["run"]) == 2
    assert "missing required fields: experiment" in capsys.readouterr().err


@pytest.mark.parametrize(
    "data, message",
    [
        ({"experiment": "x", "out": "o", "colour": 1}, "unknown config fields"),
        ({"experiment": "x", "out": "o", "seed": -1}, "seed"),
        ({"experiment": "x", "out": "o", "seed": True}, "seed"),
        ({"experiment": "x", "out": "o", "params": 3}, "params"),
    ],
)
def test_config_validation(data, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.from_mapping(data)


def test_unknown_experiment(tmp_path, capsys):
    assert cli.main(["run", "navier-stokes", "--out", str(tmp_path)]) == 2
    assert "unknown experiment" in capsys.readouterr().err


def test_parameter_precondition(tmp_path, capsys):
    assert cli.main(["profile", "--experiment", "elliptic", "--alpha", "0.5", "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err
    assert cli.main(["run", "burgers-gradient", "--param", "fractions=1.5", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "burgers-gradient", "--param", "speed=2", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "burgers-gradient", "--param", "fractions", "--out", str(tmp_path)]) == 2


def test_unknown_field(tmp_path, capsys):
    assert cli.main(["bichar", "--experiment", "expansion", "--field", "tornado", "--out", str(tmp_path)]) == 2
    assert "tornado" in capsys.readouterr().err


def test_run_writes_report_and_tables(tmp_path):
    assert cli.main(["run", "burgers-gradient", "--out", str(tmp_path), *FAST]) == 0
    rep = report(tmp_path, "burgers-gradient")
    assert rep["passed"] and rep["anchor"] and rep["tables"]
    for rec in rep["records"]:
        assert set(rec) >= {"name", "measured", "expected", "tolerance", "passed", "anchor"}
    for t in rep["tables"]:
        assert (tmp_path / "burgers-gradient" / t).read_text().count("\n") >= 2


def test_same_config_same_hash(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["bichar", "--experiment", "beta-bound", "--field", "abc",
            "--param", "samples=16", "--param", "times=0.5", "--param", "ascent_iters=0"]
    for out in (a, b):
        assert cli.main([*args, "--seed", "7", "--out", str(out)]) == 0
    ra, rb = report(a, "beta-bound"), report(b, "beta-bound")
    assert ra["config_hash"] == rb["config_hash"] and ra["records_hash"] == rb["records_hash"]
    for t in ra["tables"]:
        assert (a / "beta-bound" / t).read_bytes() == (b / "beta-bound" / t).read_bytes()
    c = tmp_path / "c"
    cli.main([*args, "--seed", "8", "--out", str(c)])
    assert report(c, "beta-bound")["records_hash"] != ra["records_hash"]


def test_toml_config(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'experiment = "burgers-gradient"\nout = "{tmp_path / "toml"}"\nseed = 3\n\n[params]\nfractions = [0.5, 0.9]\n')
    assert cli.main(["run", "--config", str(cfg)]) == 0
    rep = report(tmp_path / "toml", "burgers-gradient")
    assert rep["seed"] == 3 and rep["params"]["fractions"] == [0.5, 0.9]


def test_bad_toml(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("experiment = \n")
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 2


def test_exit_status_reflects_failure(tmp_path):
    # the bound-exponent slope check of the growth experiment does not hold
    assert cli.main(["run", "burgers-growth", "--out", str(tmp_path), "--param", "p_values=2"]) == 1
    assert cli.main(["report", str(tmp_path)]) == 1


def test_report_summary(tmp_path, capsys):
    cli.main(["run", "burgers-gradient", "--out", str(tmp_path), *FAST])
    capsys.readouterr()
    assert cli.main(["report", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS burgers-gradient")
    assert cli.main(["report", str(tmp_path / "nothing")]) == 2


def test_profile_emit(tmp_path):
    assert cli.main(["profile", "--experiment", "l12-closed-form", "--alpha-ladder", "0.1,0.05",
                     "--emit", "--alpha", "0.1", "--out", str(tmp_path)]) == 0
    for name in ("omega_bar", "eta_bar"):
        assert (tmp_path / "profile-fields" / f"{name}.csv").exists()
        assert "c_omega" in (tmp_path / "profile-fields" / f"{name}.json").read_text()
