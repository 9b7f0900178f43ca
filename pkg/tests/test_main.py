import math

import pytest
from fastapi.testclient import TestClient

from main import app

client = TestClient(app)


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_root_lists_tools():
    assert "/tools/zeta" in client.get("/").json()["endpoints"]


def test_zeta():
    data = client.post("/tools/zeta", json={"delta": "3", "gamma": 0.5, "gammaPrime": 0.0}).json()
    assert data["zeta"] == pytest.approx(-1.0 / 3.0)
    assert data["negativeRegion"] is True


def test_zeta_infinite_values_are_strings():
    data = client.post("/tools/zeta", json={"delta": "inf", "gamma": 0.0, "gammaPrime": 0.0}).json()
    assert data["zeta"] == "-inf"
    assert data["delta"] == "inf"


def test_zeta_bad_delta():
    response = client.post("/tools/zeta", json={"delta": "abc"})
    assert response.status_code == 400


def test_expected_degree():
    data = client.post("/tools/expectedDegree", json={"model": {"model": "gilbert"}}).json()
    assert data["expectedDegree"] == pytest.approx(math.pi)


def test_expected_degree_rejects_lattice_models():
    response = client.post("/tools/expectedDegree", json={"model": {"model": "lrp", "dim": 1, "delta": 3}})
    assert response.status_code == 400


def test_invalid_model_is_422():
    response = client.post("/tools/expectedDegree", json={"model": {"model": "boolean", "gamma": 0}})
    assert response.status_code == 422
    assert response.json()["detail"].startswith("model")


def test_model_exponents():
    data = client.post("/tools/modelExponents", json={"model": {"model": "lrp", "dim": 1, "delta": 3}}).json()
    assert data["zeta"] == pytest.approx(-1.0)
    assert data["xi"] == "-inf"
    assert data["rate"] == pytest.approx(-1.0)


def test_bracket_integral():
    data = client.post(
        "/tools/bracketIntegral",
        json={"model": {"model": "soft-boolean", "gamma": 0.5, "delta": 3}, "radii": [1e2, 1e3, 1e4, 1e5]},
    ).json()
    assert len(data["values"]) == 4
    assert data["fit"]["slope"] == pytest.approx(-2.0 / 3.0, abs=0.05)


def test_bracket_integral_with_two_radii_has_no_fit():
    data = client.post(
        "/tools/bracketIntegral",
        json={"model": {"model": "soft-boolean", "gamma": 0.5, "delta": 3}, "radii": [10, 100]},
    ).json()
    assert data["fit"] is None
    assert "note" in data


def test_psi_bound():
    data = client.post("/tools/psiBound", json={"n": 1, "xi": -2, "mu": -3, "dim": 1, "c": 15}).json()
    assert data["bound"] == pytest.approx(2048.0)
    assert client.post("/tools/psiBound", json={"n": 1, "xi": -2, "mu": -3, "dim": 1, "c": 1}).status_code == 400


def test_generate():
    data = client.post("/tools/generate", json={"model": {"model": "gilbert", "window": 20}, "seed": 7}).json()
    assert data["seed"] == 7
    assert data["vertices"] >= data["verticesInside"] > 0
    assert data["edges"] > 0


def test_generate_reports_the_grown_interference_margin():
    model = {"model": "interference", "gamma": 0.3, "delta": 3, "beta": 0.5, "window": 10, "pad": 0}
    data = client.post("/tools/generate", json={"model": model, "seed": 1}).json()
    assert data["pad"] > 0.0
    assert data["vertices"] > data["verticesInside"]


def test_generate_too_large():
    response = client.post("/tools/generate", json={"model": {"model": "gilbert", "window": 1000}})
    assert response.status_code == 413


def test_run_experiment():
    config = {
        "kind": "bracket-oracle",
        "model": {"model": "soft-boolean", "gamma": 0.5, "delta": 3},
        "scales": [100, 1000, 10000],
    }
    data = client.post("/tools/runExperiment", json={"config": config}).json()
    assert data["experiment"] == "bracket-oracle"
    assert len(data["summary"]) == 3
    assert data["replicateCsv"] is None
    assert data["fits"][0]["quantity"] == "bracket"


def test_run_experiment_invalid_config():
    response = client.post("/tools/runExperiment", json={"config": {"kind": "longedge-scaling"}})
    assert response.status_code == 422
