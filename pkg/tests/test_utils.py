import math

import pytest

import utils
from chemdist.core.config import parse_experiment_config
from chemdist.core.errors import ConfigError
from chemdist.core.experiments import run_experiment


def test_model_presets():
    assert "gilbert" in utils.load_model_presets()["models"]
    assert utils.model_preset("lrp-linear")["model"] == "lrp"
    with pytest.raises(ConfigError):
        utils.model_preset("no-such-model")


def test_experiment_presets():
    data = utils.experiment_preset("bracket-standard")
    assert data["name"] == "bracket-standard"
    assert data["kind"] == "bracket-oracle"
    with pytest.raises(ConfigError):
        utils.experiment_preset("no-such-experiment")


def test_missing_config_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("CHEMDIST_CONFIG_DIR", str(tmp_path / "nowhere"))
    assert utils.load_model_presets() == {"models": {}}


def test_invalid_yaml(monkeypatch, tmp_path):
    (tmp_path / "models.yaml").write_text("models: [unclosed\n")
    monkeypatch.setenv("CHEMDIST_CONFIG_DIR", str(tmp_path))
    with pytest.raises(ConfigError):
        utils.load_model_presets()


def test_format_cell():
    assert utils.format_cell(None) == "-"
    assert utils.format_cell(True) == "yes"
    assert utils.format_cell(math.nan) == "nan"
    assert utils.format_cell(0.123456) == "0.1235"
    assert utils.format_cell("abc") == "abc"


def test_table_lines():
    lines = utils.table_lines([{"m": 8, "estimate": 0.25}], ["m", "estimate"])
    assert lines == ["m  estimate", "8      0.25"]


def test_generate_report(tmp_path):
    config = parse_experiment_config({
        "kind": "bracket-oracle",
        "model": {"model": "soft-boolean", "gamma": 0.5, "delta": 3},
        "scales": [100, 1000, 10000],
        "output": str(tmp_path / "bracket"),
    })
    result = run_experiment(config)
    path = utils.generate_report(result)
    assert path == str(tmp_path / "bracket" / "report.pdf")
    with open(path, "rb") as fh:
        assert fh.read(4) == b"%PDF"
