import json
import os

from cli import main


def _output(capsys):
    return json.loads(capsys.readouterr().out)


def test_longedges(capsys):
    code = main(["longedges", "--model", "gilbert", "--m", "10", "--n", "1", "--reps", "100"])
    assert code == 0
    data = _output(capsys)
    assert data["successes"] == 0
    assert data["upper_bound"] > 0


def test_generate_writes_csvs(tmp_path, capsys):
    out = str(tmp_path / "graph")
    assert main(["generate", "--model", "gilbert", "--window", "10", "--seed", "3", "--out", out]) == 0
    data = _output(capsys)
    assert os.path.exists(os.path.join(out, "vertices.csv"))
    assert os.path.exists(os.path.join(out, "edges.csv"))
    assert data["vertices"] > 0


def test_distance_between_vertices(capsys):
    code = main(["distance", "--model", "gilbert", "--window", "10", "--source", "0", "--target", "0"])
    assert code == 0
    assert _output(capsys)["distance"] == 0


def test_distance_needs_targets_or_radii(capsys):
    assert main(["distance", "--model", "gilbert", "--window", "10"]) == 2
    assert "radii" in capsys.readouterr().err


def test_renorm_verdicts(tmp_path, capsys):
    path = str(tmp_path / "verdicts.csv")
    assert main(["renorm", "--model", "gilbert", "--K", "4", "--stage", "1", "--verdicts", path]) == 0
    data = _output(capsys)
    assert data["K_n"] == 4
    assert os.path.exists(path)


def test_experiment_from_config(tmp_path, capsys):
    path = tmp_path / "bracket.yaml"
    path.write_text(
        "kind: bracket-oracle\n"
        "model: {model: soft-boolean, gamma: 0.5, delta: 3}\n"
        "scales: [100, 1000, 10000]\n"
    )
    out = str(tmp_path / "run")
    assert main(["experiment", "--config", str(path), "--out", out, "--report"]) == 0
    data = _output(capsys)
    assert os.path.exists(data["summary"])
    assert os.path.exists(os.path.join(out, "report.pdf"))


def test_experiment_preset(tmp_path, capsys):
    assert main(["experiment", "--preset", "bracket-tie", "--out", str(tmp_path / "tie")]) == 0
    assert _output(capsys)["experiment"] == "bracket-tie"


def test_invalid_config_exits_with_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("kind: longedge-scaling\nscales: [4, 8, 16]\nreplicates: 5\n")
    assert main(["experiment", "--config", str(path)]) == 2
    assert "replicates" in capsys.readouterr().err


def test_experiment_needs_a_source(capsys):
    assert main(["experiment"]) == 2
