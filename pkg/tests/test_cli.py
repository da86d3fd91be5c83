import filecmp
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from dtdq_aoi import cli
from dtdq_aoi.metrics import NumericalError

GOLDEN = Path(__file__).parent / "golden"

CONFIG = """\
servers:
  s1: {kind: geometric, mean: 3}
  s2: {kind: uniform, a: 1, b: 4}
k: 2
priority: S2
simulation: {slots: 20000, seed: 5}
optimize: {k_max: 5}
sweep:
  type: mean
  family: geometric
  means: {start: 2, stop: 3, step: 0.5}
  k_max: 4
  sim_slots: 10000
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(CONFIG)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("command, files", [
    ("analyze", {"report.json", "summary.csv", "aoi_pmf.csv", "paoi_pmf.csv"}),
    ("simulate", {"simulation.json", "sim_summary.csv", "aoi_histogram.csv", "paoi_histogram.csv"}),
    ("optimize", {"optimum.json", "curve.csv", "optimum.csv"}),
    ("sweep", {"sweep.json", "sweep_long.csv", "sweep_optima.csv", "sweep.gp"}),
    ("dump-states", {"amc_states.csv"}),
    ("dump-matrix", {"amc_matrix.csv"}),
])
def test_commands_write_expected_files_deterministically(tmp_path, config, command, files):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(command, "--config", config, "--out", first) == 0
    assert run(command, "--config", config, "--out", second) == 0
    assert {p.name for p in first.iterdir()} == files
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
        assert (first / name).read_bytes().startswith((b"# tool: dtdq_aoi", b'{\n  "'))


@pytest.mark.parametrize("argv, name", [
    (["analyze", "--format", "csv"], "summary.csv"),
    (["simulate", "--format", "csv"], "sim_summary.csv"),
    (["dump-states", "--chain", "amc"], "amc_states.csv"),
    (["dump-matrix", "--chain", "rmc"], "rmc_matrix.csv"),
])
def test_golden_files(tmp_path, argv, name):
    assert run(*argv, "--config", GOLDEN / "golden.yaml", "--out", tmp_path) == 0
    assert filecmp.cmp(tmp_path / name, GOLDEN / name, shallow=False), name


def test_reproduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("reproduce", "fig7", "--slots", 10000, "--k-max", 6, "--out", a) == 0
    assert run("reproduce", "fig7", "--slots", 10000, "--k-max", 6, "--out", b) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["fig7.csv", "fig7.gp"]
    assert all(filecmp.cmp(a / n, b / n, shallow=False) for n in names)


def test_overrides_change_provenance(tmp_path, config):
    assert run("simulate", "--config", config, "--out", tmp_path / "a", "--seed", 11, "--slots", 10000) == 0
    text = (tmp_path / "a" / "sim_summary.csv").read_text()
    assert "# seed: 11" in text


def test_output_env(tmp_path, config, monkeypatch):
    monkeypatch.setenv("DTDQ_AOI_OUT", str(tmp_path / "env"))
    assert run("dump-states", "--config", config, "--chain", "rmc") == 0
    assert (tmp_path / "env" / "rmc_states.csv").exists()


@pytest.mark.parametrize("text, needle", [
    (CONFIG + "bogus: 1\n", "line 14, field 'bogus'"),
    (CONFIG.replace("mean: 3}", "mean: 3, shape: 2}"), "servers.s1"),
    (CONFIG.replace("k: 2", "k: -1"), "field 'k'"),
    (CONFIG.replace("priority: S2", "priority: S3"), "field 'priority'"),
    ("servers: [\n", "invalid YAML"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert run("analyze", "--config", path, "--out", tmp_path) == 2
    assert needle in capsys.readouterr().err


def test_k_zero_analysis_points_to_simulation(tmp_path, config, capsys):
    config.write_text(CONFIG.replace("k: 2", "k: 0"))
    assert run("analyze", "--config", config, "--out", tmp_path) == 2
    assert "simulate" in capsys.readouterr().err
    assert run("simulate", "--config", config, "--out", tmp_path) == 0


@pytest.mark.parametrize("argv", [
    ["reproduce", "fig99"],
    ["reproduce", "fig3", "--slots", "10"],
    ["analyze"],
    ["frobnicate"],
    ["simulate", "--config", "missing.yaml"],
])
def test_usage_errors_exit_2(argv):
    assert cli.main(argv) == 2


def test_numerical_failure_exits_3(tmp_path, config, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalError("tail mass still 1e-3")
    monkeypatch.setattr(cli, "analyze", broken)
    assert run("analyze", "--config", config, "--out", tmp_path) == 3


def test_version_and_help(capsys):
    assert cli.main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out
    assert cli.main(["--help"]) == 0


def test_console_script(tmp_path, config):
    exe = shutil.which("dtdq-aoi")
    cmd = [exe] if exe else [sys.executable, "-m", "dtdq_aoi.cli"]
    out = subprocess.run(cmd + ["dump-states", "--config", str(config), "--out", str(tmp_path)],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip().endswith("amc_states.csv")
