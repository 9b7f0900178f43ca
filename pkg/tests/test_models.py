import logging
import math

import numpy as np
import pytest

from chemdist.core.config import ModelSpec
from chemdist.core.ellipses import ellipses_overlap, point_in_ellipse
from chemdist.core.errors import BoundaryError, UsageError
from chemdist.core.kernels import ConnectionKernel
from chemdist.core.models import (
    InterferenceParams,
    auto_pad,
    check_interference_boundary,
    connect_boolean,
    connect_gilbert,
    connect_interference,
    connect_long_range_percolation,
    connect_wdrcm,
    expected_degree,
    interference_counts,
    interference_pad_cap,
    model_exponents,
    realize,
    resolve_pad,
)
from chemdist.core.point_process import MarkedPointCloud, Window, sample_poisson, sample_site_lattice
from chemdist.core.seeding import vertex_keys


def _pairs(graph):
    return {tuple(e) for e in graph.edges.tolist()}


def _brute_pairs(positions, linked):
    n = len(positions)
    out = set()
    for i in range(n):
        for j in range(i + 1, n):
            if linked(i, j, float(np.linalg.norm(positions[i] - positions[j]))):
                out.add((i, j))
    return out


def test_gilbert_matches_brute_force():
    cloud = sample_poisson(Window(dim=2, side=8.0), 1.0, seed=1)
    graph = connect_gilbert(cloud)
    assert _pairs(graph) == _brute_pairs(cloud.positions, lambda i, j, r: r <= 1.0)


def test_boolean_matches_brute_force():
    cloud = sample_poisson(Window(dim=2, side=10.0), 1.0, seed=2)
    gamma = 0.5
    radii = cloud.marks ** (-gamma / 2.0)
    graph = connect_boolean(cloud, gamma)
    expected = _brute_pairs(cloud.positions, lambda i, j, r: r <= max(radii[i], radii[j]))
    assert _pairs(graph) == expected


def test_wdrcm_indicator_uses_boolean_path():
    cloud = sample_poisson(Window(dim=2, side=10.0), 1.0, seed=3)
    kernel = ConnectionKernel(gamma=0.5)
    assert _pairs(connect_wdrcm(cloud, kernel, seed=0)) == _pairs(connect_boolean(cloud, 0.5))


def test_exact_generator_is_permutation_invariant():
    cloud = sample_poisson(Window(dim=2, side=12.0), 1.0, seed=4)
    kernel = ConnectionKernel(gamma=0.3, gamma_prime=0.2, delta=3.0)
    order = np.random.default_rng(0).permutation(len(cloud))
    a = connect_wdrcm(cloud, kernel, seed=9, method="exact")
    b = connect_wdrcm(cloud.permuted(order), kernel, seed=9, method="exact")
    assert a.edge_keys() == b.edge_keys()
    assert a.edge_count > 0


def test_thinned_generator_matches_exact_statistics():
    kernel = ConnectionKernel(gamma=0.3, delta=3.0)
    window = Window(dim=2, side=20.0)
    degrees = {"exact": [], "thinned": []}
    maxima = {"exact": 0, "thinned": 0}
    long = {"exact": 0, "thinned": 0}
    for seed in range(10):
        cloud = sample_poisson(window, 1.0, seed=seed)
        for method in ("exact", "thinned"):
            graph = connect_wdrcm(cloud, kernel, seed=seed, method=method)
            deg = graph.degrees()
            degrees[method].append(deg)
            maxima[method] += int(deg.max())
            long[method] += int(np.sum(graph.edge_lengths > 2.0))
    exact = np.concatenate(degrees["exact"])
    thinned = np.concatenate(degrees["thinned"])
    assert thinned.mean() == pytest.approx(exact.mean(), rel=0.05)
    assert thinned.var() == pytest.approx(exact.var(), rel=0.15)
    assert maxima["thinned"] == pytest.approx(maxima["exact"], rel=0.3)
    assert long["exact"] > 300
    assert long["thinned"] == pytest.approx(long["exact"], rel=0.15)


def test_lrp_nearest_neighbours_always_linked():
    cloud = sample_site_lattice(Window(dim=1, side=400.0), 1.0, seed=0)
    graph = connect_long_range_percolation(cloud, 3.0, 1.0, seed=5)
    lengths = graph.edge_lengths
    assert np.sum(np.isclose(lengths, 1.0)) == len(cloud) - 1
    # p = 2^-3 at distance 2
    share = np.sum(np.isclose(lengths, 2.0)) / (len(cloud) - 2)
    assert share == pytest.approx(0.125, abs=0.05)


def test_lrp_needs_lattice():
    cloud = sample_poisson(Window(dim=1, side=10.0), 1.0, seed=0)
    with pytest.raises(UsageError):
        connect_long_range_percolation(cloud, 3.0, 1.0, seed=0)


def _hand_cloud(positions, marks, side=10.0, pad=0.0):
    positions = np.asarray(positions, dtype=float)
    window = Window(dim=positions.shape[1], side=side, pad=pad)
    return MarkedPointCloud(positions, np.asarray(marks, dtype=float), window, seed=0, keys=vertex_keys(0, len(marks)))


def test_interference_counts_include_the_vertex():
    # radius u^(-beta/d) = 2 for the centre, about 1.03 for the others
    cloud = _hand_cloud(
        [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        [1.0 / 16.0, 0.9, 0.9, 0.9, 0.9],
    )
    params = InterferenceParams(beta=0.5, base_kernel=ConnectionKernel(delta=3.0))
    assert interference_counts(cloud, params).tolist() == [5, 2, 2, 2, 2]


def test_interference_thins_the_bare_kernel():
    # the centre is the lower-mark endpoint of every edge; bare probability 1, count 5
    cloud = _hand_cloud(
        [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        [1.0 / 16.0, 0.9, 0.9, 0.9, 0.9],
    )
    params = InterferenceParams(beta=0.5, base_kernel=ConnectionKernel(delta=3.0))
    hits = 0
    trials = 2000
    for seed in range(trials):
        graph = connect_interference(cloud, params, seed=seed)
        hits += int(graph.adjacency[0, 1] > 0)
    assert hits / trials == pytest.approx(0.2, abs=0.04)


def test_interference_boundary_error():
    cloud = _hand_cloud([[4.9, 0.0], [0.0, 0.0]], [1e-4, 0.5])
    params = InterferenceParams(beta=0.5, base_kernel=ConnectionKernel(delta=3.0))
    with pytest.raises(BoundaryError):
        connect_interference(cloud, params, seed=0)


def test_interference_edges_depend_only_on_the_interference_balls():
    params = InterferenceParams(beta=0.5, base_kernel=ConnectionKernel(gamma=0.3, delta=3.0))
    window = Window(dim=2, side=12.0, pad=8.0)
    box = window.box
    for seed in range(3):
        cloud = sample_poisson(window, 1.0, seed=seed)
        inner = cloud.inside(box)
        keep = np.zeros(len(cloud), dtype=bool)
        keep[inner] = True
        radius = params.radius(cloud.marks[inner], 2)
        for hit in cloud.tree.query_ball_point(cloud.positions[inner], r=radius):
            keep[hit] = True
        assert not keep.all()
        full = connect_interference(cloud, params, seed=seed, method="exact", strict=False)
        local = connect_interference(cloud.subset(keep), params, seed=seed, method="exact", strict=False)
        assert full.restrict(box).edge_count > 0
        assert full.restrict(box).edge_keys() == local.restrict(box).edge_keys()


def _interference_spec(beta=0.9):
    return ModelSpec(model="interference", gamma=0.3, delta=3.0, beta=beta)


def test_interference_window_grows_to_hold_every_ball():
    spec = _interference_spec()
    params = spec.interference_params()
    window = Window(dim=2, side=20.0)
    for seed in range(10):
        base = sample_poisson(window, 1.0, seed=seed)
        graph = realize(spec, window, seed=seed)
        grown = graph.cloud.window
        assert grown.side == window.side
        assert grown.pad >= window.pad
        assert np.array_equal(graph.cloud.positions[:len(base)], base.positions)
        radius = params.radius(base.marks, 2)[:, None]
        padded = grown.padded_box
        assert np.all(base.positions - radius >= padded.lower - 1e-9)
        assert np.all(base.positions + radius <= padded.upper + 1e-9)
        check_interference_boundary(graph.cloud, params)


def test_interference_pad_cap():
    window = Window(dim=2, side=20.0)
    assert interference_pad_cap(window, 1.0) == pytest.approx((math.sqrt(1e7) - 20.0) / 2.0)
    assert interference_pad_cap(Window(dim=2, side=20.0, pad=5000.0), 1.0) == 5000.0


def test_capped_interference_pad_warns_instead_of_failing(monkeypatch, caplog):
    # 900 expected points allow a padded side of 30, i.e. pad 5
    monkeypatch.setattr("chemdist.core.models.INTERFERENCE_POINT_CAP", 900)
    with caplog.at_level(logging.WARNING):
        graph = realize(_interference_spec(), Window(dim=2, side=20.0), seed=0)
    assert graph.cloud.window.pad == pytest.approx(5.0)
    assert "capped" in caplog.text


def test_ellipse_overlap():
    centers = np.zeros((4, 2))
    others = np.array([[1.9, 0.0], [2.1, 0.0], [3.5, 0.0], [0.0, 2.5]])
    axes_1 = np.array([[1.0, 1.0], [1.0, 1.0], [3.0, 1.0], [3.0, 1.0]])
    axes_2 = np.ones((4, 2))
    hit = ellipses_overlap(centers, axes_1, np.zeros(4), others, axes_2, np.zeros(4))
    assert hit.tolist() == [True, False, True, False]


def test_rotated_ellipse_overlap():
    # a long ellipse turned a quarter turn reaches along the y axis
    hit = ellipses_overlap([[0.0, 0.0]], [[3.0, 1.0]], [math.pi / 2.0], [[0.0, 3.5]], [[1.0, 1.0]], [0.0])
    assert hit.tolist() == [True]
    assert point_in_ellipse(np.array([[0.0, 2.9], [2.9, 0.0]]), (0.0, 0.0), 3.0, 1.0, math.pi / 2.0).tolist() == [True, False]


def _boundary(center, a, b, theta, count=1000):
    t = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    x, y = a * np.cos(t), b * np.sin(t)
    c, s = math.cos(theta), math.sin(theta)
    return np.stack([center[0] + x * c - y * s, center[1] + x * s + y * c], axis=1)


def _sampled_overlap(center_1, axes_1, theta_1, center_2, axes_2, theta_2, scale):
    """Some boundary sample of one ellipse lies in the other, both scaled about their centers."""
    a1, b1 = scale * axes_1[0], scale * axes_1[1]
    a2, b2 = scale * axes_2[0], scale * axes_2[1]
    return bool(
        point_in_ellipse(_boundary(center_1, a1, b1, theta_1), center_2, a2, b2, theta_2).any()
        or point_in_ellipse(_boundary(center_2, a2, b2, theta_2), center_1, a1, b1, theta_1).any()
    )


def test_ellipse_overlap_matches_boundary_sampling():
    rng = np.random.default_rng(21)
    k = 1000
    centers_1 = np.zeros((k, 2))
    centers_2 = rng.uniform(-8.0, 8.0, size=(k, 2))
    axes_1 = np.stack([rng.uniform(1.0, 5.0, k), np.ones(k)], axis=1)
    axes_2 = np.stack([rng.uniform(1.0, 5.0, k), np.ones(k)], axis=1)
    theta_1 = rng.uniform(0.0, math.pi, k)
    theta_2 = rng.uniform(0.0, math.pi, k)
    hit = ellipses_overlap(centers_1, axes_1, theta_1, centers_2, axes_2, theta_2)

    overlapping = separated = 0
    for i in range(k):
        args = (centers_1[i], axes_1[i], theta_1[i], centers_2[i], axes_2[i], theta_2[i])
        # a 1% margin either way settles every pair that is not close to tangency
        if _sampled_overlap(*args, scale=0.99):
            assert hit[i], i
            overlapping += 1
        elif not _sampled_overlap(*args, scale=1.01):
            assert not hit[i], i
            separated += 1
    assert overlapping > 100
    assert separated > 100
    assert overlapping + separated > 0.95 * k


def test_expected_degree_oracles():
    assert expected_degree(ConnectionKernel(), 1.0, 2) == pytest.approx(math.pi)
    assert expected_degree(ConnectionKernel(delta=3.0), 1.0, 1) == pytest.approx(3.0)
    assert expected_degree(ConnectionKernel(), 2.5, 2) == pytest.approx(2.5 * math.pi)


def test_gilbert_mean_degree_near_pi():
    spec = ModelSpec(model="gilbert", window=60.0)
    window = Window(dim=2, side=60.0, pad=resolve_pad(spec, 60.0))
    graph = realize(spec, window, seed=1)
    assert graph.mean_degree(window.box) == pytest.approx(math.pi, abs=0.15)


def test_soft_boolean_mean_degree_matches_quadrature():
    spec = ModelSpec(model="soft-boolean", gamma=0.3, delta=3.0)
    # 1.5 pi E[min(U, V)^-0.3] for the polynomial profile with delta = 3
    expected = expected_degree(spec.kernel(), spec.intensity, spec.dim)
    assert expected == pytest.approx(7.92, abs=0.01)
    window = Window(dim=2, side=30.0, pad=10.0)
    means = [realize(spec, window, seed=seed).mean_degree(window.box) for seed in range(4)]
    assert np.mean(means) == pytest.approx(expected, abs=0.5)


def test_realize_reproducible():
    spec = ModelSpec(model="soft-boolean", gamma=0.3, delta=3.0, window=15.0)
    window = Window(dim=2, side=15.0, pad=2.0)
    a = realize(spec, window, seed=3)
    b = realize(spec, window, seed=3)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.cloud.positions, b.cloud.positions)


def test_model_exponents():
    lrp = model_exponents(ModelSpec(model="lrp", dim=1, delta=3.0))
    assert lrp.zeta == pytest.approx(-1.0)
    assert lrp.mu == pytest.approx(-2.0)
    assert lrp.rate == pytest.approx(-1.0)

    boolean = model_exponents(ModelSpec(model="boolean", gamma=0.5))
    assert boolean.d_zeta == pytest.approx(-2.0)
    assert boolean.xi == -math.inf

    interference = model_exponents(ModelSpec(model="interference", gamma=0.3, delta=3.0, beta=0.5))
    assert interference.xi == pytest.approx(-1.0)

    ellipses = model_exponents(ModelSpec(model="ellipses", gamma=0.5))
    assert math.isnan(ellipses.zeta)
    assert ellipses.mu == pytest.approx(-4.0)


def test_pads():
    spec = ModelSpec(model="soft-boolean", gamma=0.3, delta=3.0)
    assert resolve_pad(spec, 20.0, internal_only=True) == 0.0
    pad = auto_pad(spec, 20.0)
    assert 0.0 < pad <= 40.0
    explicit = ModelSpec(model="soft-boolean", gamma=0.3, delta=3.0, pad=1.5)
    assert resolve_pad(explicit, 20.0) == 1.5
