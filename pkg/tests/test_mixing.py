import numpy as np
import pytest

from chemdist.core.config import ModelSpec
from chemdist.core.errors import ContractError, ParameterError
from chemdist.core.mixing import (
    MixingEstimate,
    as_displacement,
    covariance_estimate,
    estimate_mixing,
    fit_mixing_exponent,
    get_event,
    mixing_window,
    probe_locality,
    register_event,
    registered_events,
)
from chemdist.core.models import INTERFERENCE_POINT_CAP
from chemdist.core.point_process import Box
from conftest import make_graph


def _any_edge(graph, box):
    """Reads the whole graph, not just the box."""
    return graph.edge_count > 0


register_event("any-edge", _any_edge)


def test_covariance_of_a_constant_event():
    cov, stderr = covariance_estimate([1] * 10, [0] * 10)
    assert cov == 0.0
    assert stderr == pytest.approx(0.1)


def test_covariance_of_identical_indicators():
    a = [0, 1] * 50
    cov, stderr = covariance_estimate(a, a)
    assert cov == pytest.approx(0.25)
    assert stderr == pytest.approx(0.01)


def test_covariance_needs_two_samples():
    with pytest.raises(ParameterError):
        covariance_estimate([1], [1])


def test_event_registry():
    assert {"stage0-bad", "has-long-edge", "component-of-size"} <= set(registered_events())
    assert get_event("has-long-edge", n=3).label == "has-long-edge(n=3)"
    assert get_event("stage0-bad").label == "stage0-bad"
    with pytest.raises(ParameterError):
        get_event("no-such-event")


def test_builtin_events():
    graph = make_graph([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [8.0, 0.0]], [(0, 1), (1, 2), (2, 3)], side=20)
    box = Box((0.0, 0.0), 4)
    assert get_event("stage0-bad")(graph, box)
    assert not get_event("stage0-bad", fraction=2)(graph, box)
    assert not get_event("has-long-edge", n=1.0)(graph, box)
    assert get_event("component-of-size", k=3)(graph, box)
    assert not get_event("component-of-size", k=4)(graph, box)


def test_probe_accepts_local_events():
    graph = make_graph([[0.0, 0.0], [0.5, 0.0], [8.0, 0.0], [9.0, 0.0]], [(0, 1), (2, 3)], side=20)
    assert probe_locality(get_event("has-long-edge", n=0.1), graph, Box((0.0, 0.0), 4))


def test_probe_rejects_global_events():
    graph = make_graph([[0.0, 0.0], [8.0, 0.0], [9.0, 0.0]], [(1, 2)], side=20)
    with pytest.raises(ContractError):
        probe_locality(get_event("any-edge"), graph, Box((0.0, 0.0), 4))


def test_displacements():
    assert as_displacement(3.0, 2).tolist() == [3.0, 0.0]
    assert as_displacement([0.0, 4.0], 2).tolist() == [0.0, 4.0]
    with pytest.raises(ParameterError):
        as_displacement(2.0, 1)
    with pytest.raises(ParameterError):
        as_displacement([1.0, 2.0, 3.0], 2)


def test_mixing_window_holds_both_boxes():
    window = mixing_window(ModelSpec(model="gilbert"), 20.0, np.array([3.0, 0.0]))
    assert window.side == 80.0
    assert window.center == (30.0, 0.0)


def test_gilbert_stage0_bad_always_occurs():
    est = estimate_mixing(ModelSpec(model="gilbert"), get_event("stage0-bad"), 20.0, 3.0, replicates=20, seed=1)
    assert est.covariance == 0.0
    assert est.stderr == pytest.approx(1.0 / 20.0)
    assert est.p_first == 1.0
    assert est.x_norm == 3.0
    assert not est.significant


def _estimate(m, cov, stderr=1e-6):
    return MixingEstimate("e", m, (4.0,), cov, stderr, 1000, 0.5, 0.5)


def test_planted_mixing_exponent():
    fit = fit_mixing_exponent([_estimate(m, m ** -2.0) for m in (4.0, 8.0, 16.0, 32.0)])
    assert fit.slope == pytest.approx(-2.0)
    assert fit.reliable


def test_insignificant_scales_make_the_fit_unreliable():
    estimates = [_estimate(4.0, 0.1), _estimate(8.0, 0.0, 0.01), _estimate(16.0, 0.001, 0.01)]
    fit = fit_mixing_exponent(estimates)
    assert not fit.reliable
    assert len(fit.excluded) == 2


def test_interference_mixing_window_fits_the_point_budget():
    spec = ModelSpec(model="interference", gamma=0.3, delta=3.0, beta=0.9)
    for m in (8.0, 16.0, 32.0):
        window = mixing_window(spec, m, as_displacement(4.0, 2))
        assert window.pad == 0.0
        assert spec.intensity * window.padded_box.volume < INTERFERENCE_POINT_CAP
    assert mixing_window(spec, 16.0, as_displacement(4.0, 2)).side == 80.0


def test_interference_mixing_runs_with_locality_checks():
    spec = ModelSpec(model="interference", gamma=0.3, delta=3.0, beta=0.9)
    est = estimate_mixing(spec, get_event("has-long-edge", n=2), 8.0, 4.0, replicates=10, seed=2)
    assert est.replicates == 10
    assert 0.0 <= est.p_first <= 1.0
    assert 0.0 <= est.p_second <= 1.0


def test_pair_independent_model_has_no_covariance():
    # edges inside the two boxes are functions of disjoint parts of the Poisson cloud
    spec = ModelSpec(model="soft-boolean", gamma=0.3, delta=3.0)
    est = estimate_mixing(spec, get_event("has-long-edge", n=5), 8.0, 4.0, replicates=300, seed=4)
    assert 0.0 < est.p_first < 1.0
    assert 0.0 < est.p_second < 1.0
    assert abs(est.covariance) <= 4.0 * est.stderr
