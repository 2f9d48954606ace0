"""End-to-end runs of the installed command over the bundled spec configs"""
import json
import subprocess
import sys
from pathlib import Path

import pytest

SPECS = Path(__file__).parent / "specs"

# config -> (command, expected exit code)
RUNS = {
    "growth_t4.json": ("growth", 0),
    "growth_constant.json": ("growth", 2),
    "map_stretch.json": ("map", 0),
    "seq_laminate_t2.json": ("seq", 0),
    "seq_laminate_sqrt.json": ("seq", 0),
    "seq_collapse.json": ("seq", 0),
    "seq_cantor.json": ("seq", 0),
    "seq_left_jump.json": ("seq", 0),
    "criteria.json": ("criteria", 0),
    "sharpness.json": ("sharpness", 0),
}


def run_command(command, config, out, *extra):
    return subprocess.run(
        [sys.executable, "-m", "distortion_lab", command, "--config", str(config), "--out", str(out), *extra],
        capture_output=True, text=True, timeout=600,
    )


@pytest.mark.parametrize("name", sorted(RUNS))
def test_spec_config(tmp_path, name):
    command, expected = RUNS[name]
    result = run_command(command, SPECS / name, tmp_path)
    assert result.returncode == expected, result.stderr
    if expected == 0:
        assert "finished" in result.stderr
        assert any(p.suffix == ".json" for p in tmp_path.iterdir())
    else:
        assert "Input error" in result.stderr


def test_plots_are_written(tmp_path):
    result = run_command("seq", SPECS / "seq_laminate_sqrt.json", tmp_path, "--plot")
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "values.svg").read_text().lstrip().startswith("<?xml")


def test_verbose_logging(tmp_path):
    result = run_command("growth", SPECS / "growth_t4.json", tmp_path, "--verbose")
    assert result.returncode == 0, result.stderr
    assert " - DEBUG - " in result.stderr


def test_unknown_command_is_rejected(tmp_path):
    result = run_command("plot", SPECS / "t2.json", tmp_path)
    assert result.returncode == 2


def test_every_spec_config_is_valid_json():
    for path in SPECS.glob("*.json"):
        assert isinstance(json.loads(path.read_text()), dict), path.name
