import os
from pathlib import Path

import pytest

from sqroute.cli import main
from sqroute.config import (DESK, PAPER, ConfigError, apply_overrides, default_config, from_dict,
                            load_config)

BOUNDS_TOML = """
schema_version = 1
experiment = "bounds-report"

[instance]
n = 1
v = 1.0

[[classes]]
rate = 1.0
mean = 0.3
weight = 0.6

[[classes]]
rate = 2.0
mean = 0.2
weight = 0.4
"""


def write(tmp_path: Path, text: str, name: str = "cfg.toml") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_for_every_experiment():
    for exp in DESK:
        if exp == "bounds-report":
            continue
        cfg = default_config(exp)
        assert cfg.runs == DESK[exp]["runs"]


def test_missing_schema_version_named():
    with pytest.raises(ConfigError) as err:
        from_dict({"experiment": "tightness"})
    assert err.value.field == "schema_version"


def test_missing_class_field_named(tmp_path):
    text = BOUNDS_TOML.replace("weight = 0.4\n", "")
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, text))
    assert err.value.field == "classes[1].weight"


def test_unknown_field_rejected():
    with pytest.raises(ConfigError) as err:
        from_dict({"schema_version": 1, "experiment": "popt", "sede": 3})
    assert err.value.field == "sede"


def test_bad_param_type_and_range():
    with pytest.raises(ConfigError) as err:
        from_dict({"schema_version": 1, "experiment": "tightness", "params": {"rhos": [0.5, 1.2]}})
    assert err.value.field == "params.rhos"
    with pytest.raises(ConfigError) as err:
        from_dict({"schema_version": 1, "experiment": "tightness", "params": {"m": "four"}})
    assert err.value.field == "params.m"


def test_wrong_schema_version():
    with pytest.raises(ConfigError) as err:
        from_dict({"schema_version": 2, "experiment": "popt"})
    assert err.value.field == "schema_version"


def test_syntax_error_field(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, "schema_version = = 1\n"))
    assert err.value.field == "<syntax>"
    assert "line 1" in str(err.value)


def test_overrides():
    cfg = default_config("tightness")
    out = apply_overrides(cfg, seed=9, runs=3, iterations=400)
    assert (out.seed, out.runs, out.iterations, out.window) == (9, 3, 400, 100)
    half = apply_overrides(cfg, scale=0.5)
    assert (half.runs, half.iterations, half.window) == (10, 1000, 250)
    paper = apply_overrides(cfg, paper_scale=True)
    assert (paper.runs, paper.iterations, paper.window) == tuple(PAPER["tightness"].values())
    with pytest.raises(ConfigError):
        apply_overrides(cfg, scale=0.0)


def test_digest_ignores_out_dir_and_workers():
    cfg = default_config("popt")
    assert apply_overrides(cfg, out_dir="x", workers=4).digest() == cfg.digest()
    assert apply_overrides(cfg, seed=1).digest() != cfg.digest()


def test_cli_missing_field_exit(tmp_path, capsys):
    text = BOUNDS_TOML.replace("mean = 0.3\n", "")
    rc = main(["run", str(write(tmp_path, text)), "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    assert "classes[0].mean" in capsys.readouterr().err


def test_cli_syntax_error_exit(tmp_path, capsys):
    rc = main(["run", str(write(tmp_path, "schema_version = [\n"))])
    assert rc != 0
    assert "<syntax>" in capsys.readouterr().err


def test_cli_missing_file_exit(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) != 0


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_cli_unwritable_out_dir_permissions(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        rc = main(["run", str(write(tmp_path, BOUNDS_TOML)), "--out-dir", str(locked / "sub")])
    finally:
        locked.chmod(0o700)
    assert rc == 3


def test_cli_unwritable_out_dir(tmp_path, capsys):
    # a regular file where the output directory should be cannot be created by anyone
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    rc = main(["run", str(write(tmp_path, BOUNDS_TOML)), "--out-dir", str(blocker / "sub")])
    assert rc == 3
    assert "cannot write output" in capsys.readouterr().err


def test_cli_bounds_report_one_row(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["run", str(write(tmp_path, BOUNDS_TOML)), "--out-dir", str(out)])
    assert rc == 0
    lines = (out / "bounds_report.csv").read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert len(body) == 2  # header + one row
    assert any(ln.startswith("# config_hash") for ln in lines)
    assert (out / "manifest_bounds-report.json").exists()


def test_cli_invalid_instance_exit(tmp_path, capsys):
    text = BOUNDS_TOML.replace("mean = 0.3", "mean = 3.0")  # rho >= 1
    rc = main(["run", str(write(tmp_path, text)), "--out-dir", str(tmp_path / "o")])
    assert rc == 1


def test_cli_popt_byte_identical(tmp_path):
    args = ["popt", "--runs", "4", "--seed", "5"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_cli_subcommand_with_config(tmp_path):
    cfg = write(tmp_path, 'schema_version = 1\nruns = 2\n[params]\nms = [3]\n')
    out = tmp_path / "o"
    assert main(["popt", "--config", str(cfg), "--out-dir", str(out)]) == 0
    text = (out / "popt.csv").read_text()
    assert "# runs: 2\n" in text
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")][1:]
    assert [r.split(",")[0] for r in rows] == ["3"]
