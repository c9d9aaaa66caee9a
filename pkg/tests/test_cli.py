import json
import os

import numpy as np
import pytest

from levyavg import BbarTable, ConfigError, RateCurve
from levyavg import cli, validation
from levyavg.cli import KEYS, main, parse_config


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_dry_run_echoes_defaults(capsys):
    assert main(["strong-rate", "--alpha", "1.5", "--dry-run"]) == 0
    cfg = json.loads(capsys.readouterr().out)["config"]
    assert cfg["n_paths"] == 10_000 and cfg["h_rule"] == "eps/50" and cfg["seed"] == 0
    assert cfg["eps_list"] == [2.0**-k for k in range(3, 9)]


def test_every_experiment_dry_runs(capsys):
    for exp in KEYS:
        args = [exp, "--dry-run"] + ([] if exp == "validate" else ["--alpha", "1.5"])
        assert main(args) == 0, exp
    capsys.readouterr()


def test_unknown_key_names_file_and_line(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nalpha = 1.5\nbogus = 3\n")
    assert main(["sample", "--config", str(cfg), "--dry-run"]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err and f"{cfg}:3" in err


def test_section_header_is_optional(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[levyavg]\nalpha = 1.3\nn = 50\n")
    assert main(["sample", "--config", str(cfg), "--n", "60", "--dry-run"]) == 0
    conf = json.loads(capsys.readouterr().out)["config"]
    assert conf["alpha"] == 1.3 and conf["n"] == 60  # flags override the file


@pytest.mark.parametrize("argv", [
    ["sample"],                                           # alpha is required
    ["sample", "--alpha", "2.5"],
    ["sample", "--alpha", "abc"],
    ["simulate", "--alpha", "1.5", "--h-rule", "eps/10"],
    ["simulate", "--alpha", "1.5", "--problem", "nope"],
    ["strong-rate", "--alpha", "1.5", "--eps-list", "0.1,0.2,0.05,0.01"],
    ["strong-rate", "--alpha", "1.5", "--p", "1.6"],
    ["validate", "--criteria", "11"],
    ["sample", "--alpha", "1.5", "stray"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv + ["--dry-run"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file(capsys):
    assert main(["sample", "--config", "/nonexistent/x.cfg"]) == 2


def test_short_flag_is_not_help_abbreviation(capsys):
    assert main(["frozen", "--alpha", "1.5", "--h", "0.02", "--dry-run"]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["h"] == 0.02


def test_stiffness_exits_3(tmp_path, capsys):
    code, _ = _run(tmp_path, "frozen", "--alpha", "1.5", "--h", "0.2")
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_validate_failure_exits_4(tmp_path, monkeypatch):
    monkeypatch.setitem(validation.CRITERIA, 4, lambda **kw: validation.CriterionResult(4, "stub", False))
    code, out = _run(tmp_path, "validate", "--criteria", "4")
    assert code == 4
    assert (out / "validation.csv").read_text().splitlines()[1] == "4,stub,0"


def test_summary_json(tmp_path):
    code, out = _run(tmp_path, "sample", "--alpha", "1.5", "--n", "500", "--seed", "9")
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert set(s) == {"experiment", "config", "results", "runtime_s", "seed", "build"}
    assert s["seed"] == 9 and s["config"]["n"] == 500
    assert s["build"].startswith("0.1.0")


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LEVYAVG_OUT", str(tmp_path / "env"))
    assert main(["sample", "--alpha", "1.5", "--n", "10"]) == 0
    assert (tmp_path / "env" / "samples.csv").exists()


def test_out_key_in_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"alpha = 1.5\nn = 10\nout = {tmp_path / 'fromfile'}\n")
    assert main(["sample", "--config", str(cfg)]) == 0
    assert (tmp_path / "fromfile" / "samples.csv").exists()


def test_parse_config_precedence(monkeypatch):
    monkeypatch.setenv("LEVYAVG_OUT", "/env")
    assert parse_config("sample", {}, {"alpha": "1.5"}).out == "/env"
    assert parse_config("sample", {}, {"alpha": "1.5"}, out="/flag").out == "/flag"
    monkeypatch.delenv("LEVYAVG_OUT")
    assert parse_config("sample", {}, {"alpha": "1.5"}).out == "levyavg_out"
    with pytest.raises(ConfigError):
        parse_config("sample", {}, {})


@pytest.mark.parametrize("exp,extra,files", [
    ("strong-rate", ["--eps-list", "0.125,0.0625,0.03125,0.015625", "--n-paths", "200", "--n-bootstrap", "20"],
     ["strong_curve.csv"]),
    ("simulate", ["--problem", "xcoupled"], ["path.csv"]),
    ("poisson", ["--y", "1,2", "--n-paths", "100"], ["corrector.csv"]),
])
def test_byte_identical_across_workers(tmp_path, exp, extra, files):
    bodies = []
    for w in (1, 2):
        code, out = _run(tmp_path, exp, "--alpha", "1.5", "--workers", str(w), *extra, name=f"w{w}")
        assert code == 0
        bodies.append([(out / f).read_bytes() for f in files])
    assert bodies[0] == bodies[1]


def test_rate_outputs_round_trip(tmp_path):
    code, out = _run(tmp_path, "strong-rate", "--alpha", "1.5", "--eps-list", "0.125,0.0625,0.03125,0.015625",
                     "--n-paths", "2000", "--n-bootstrap", "20")
    assert code == 0
    curve = RateCurve.from_csv(str(out / "strong_curve.csv"))
    assert curve.eps.tolist() == [0.125, 0.0625, 0.03125, 0.015625]
    fit = json.loads((out / "strong_fit.json").read_text())
    assert fit["ci"][0] <= fit["slope"] <= fit["ci"][1]


def test_weak_rate_degenerate_fit_is_reported(tmp_path):
    code, out = _run(tmp_path, "weak-rate", "--alpha", "1.5", "--eps-list", "0.25,0.125,0.0625,0.03125",
                     "--n-paths", "20", "--n-bootstrap", "10")
    s = json.loads((out / "summary.json").read_text())
    assert code == 0
    assert (s["results"]["fit"] is None) == (not (out / "weak_fit.json").exists())


def test_bbar_table_output(tmp_path):
    code, out = _run(tmp_path, "bbar", "--alpha", "1.5", "--problem", "bounded", "--n-x", "3", "--n-reps", "4",
                     "--T", "20")
    assert code == 0
    tab = BbarTable.from_csv(str(out / "bbar.csv"))
    assert tab.x.tolist() == [-3.0, 0.0, 3.0]
    assert np.all(np.abs(tab.values - np.sin(tab.x)) < 0.2)


def test_oracle_output(tmp_path):
    code, out = _run(tmp_path, "oracle", "--alpha", "1.5", "--eps-list", "0.25,0.125,0.0625", "--n-paths", "500")
    assert code == 0
    assert (out / "oracle_ratios.csv").read_text().splitlines()[0] == "eps,ratio,stderr"
    assert "slope" in json.loads((out / "oracle_fit.json").read_text())


def test_console_script_installed():
    import shutil
    import subprocess

    exe = shutil.which("levyavg")
    if exe is None:
        pytest.skip("console script not on PATH")
    res = subprocess.run([exe, "sample", "--alpha", "1.5", "--dry-run"], capture_output=True, text=True)
    assert res.returncode == 0
