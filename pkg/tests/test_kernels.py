import math

import numpy as np
import pytest

from chemdist.core.errors import ParameterError
from chemdist.core.kernels import (
    ConnectionKernel,
    ball_volume,
    interference_zeta_negative,
    inverse_mark_moment,
    parse_delta,
    zeta,
    zeta_negative_region,
)


def test_parse_delta():
    assert parse_delta("inf") == math.inf
    assert parse_delta("3") == 3.0
    assert parse_delta(2.5) == 2.5
    with pytest.raises(ParameterError):
        parse_delta("three")


@pytest.mark.parametrize(
    "delta, gamma, gamma_prime, expected",
    [
        (3.0, 0.5, 0.0, -1.0 / 3.0),
        (4.0, 0.3, 0.2, -1.5),
        (math.inf, 0.5, 0.0, -1.0),
        (3.0, 0.0, 0.0, -1.0),
        (1.5, 0.0, 0.0, 0.5),
    ],
)
def test_zeta_values(delta, gamma, gamma_prime, expected):
    assert zeta(delta, gamma, gamma_prime) == pytest.approx(expected)


def test_zeta_limits():
    # every term degenerates to -inf
    assert zeta(math.inf, 0.0, 0.0) == -math.inf
    # 0/0 in the third term is undefined
    assert math.isnan(zeta(3.0, 0.0, 1.0))


def test_zeta_negative_exactly_on_region():
    rng = np.random.default_rng(0)
    margin = 1e-6
    checked = 0
    for _ in range(10_000):
        delta = rng.uniform(1.01, 8.0)
        gamma = rng.uniform(0.0, 0.99)
        gamma_prime = rng.uniform(0.0, 1.5)
        if min(abs(delta - 2.0), abs(gamma - (1.0 - 1.0 / delta)), abs(gamma_prime - (1.0 - gamma))) < margin:
            continue
        z = zeta(delta, gamma, gamma_prime)
        assert (z < 0) == zeta_negative_region(delta, gamma, gamma_prime)
        checked += 1
    assert checked > 9_900


def test_interference_region():
    assert interference_zeta_negative(0.3, 3.0, 0.5)
    assert not interference_zeta_negative(0.9, 3.0, 0.5)
    assert interference_zeta_negative(0.9, math.inf, 0.5)


def test_kernel_validation():
    with pytest.raises(ParameterError):
        ConnectionKernel(gamma=1.0)
    with pytest.raises(ParameterError):
        ConnectionKernel(delta=1.0)
    with pytest.raises(ParameterError):
        ConnectionKernel(gamma=0.5, gamma_prime=1.5)
    with pytest.raises(ParameterError):
        ConnectionKernel(amplitude=-1.0)


def test_polynomial_profile():
    kernel = ConnectionKernel(delta=2.0)
    assert kernel.profile == "polynomial"
    assert kernel.rho(0.5) == pytest.approx(1.0)
    assert kernel.rho(2.0) == pytest.approx(0.25)
    assert kernel.rho(0.0) == pytest.approx(1.0)


def test_indicator_profile():
    kernel = ConnectionKernel(amplitude=2.0)
    assert kernel.profile == "indicator"
    assert kernel.kink == 2.0
    assert kernel.rho([2.0, 2.0001]).tolist() == [1.0, 0.0]


def test_lattice_pair_probability():
    kernel = ConnectionKernel(delta=3.0)
    # rho(|x - y|^d) at distance 2 in d = 2
    assert kernel.probability(0.5, 0.5, 2.0, 2) == pytest.approx(1.0 / 64.0)
    assert kernel.probability(0.5, 0.5, 2.0, 1) == pytest.approx(0.125)


def test_probability_symmetric_in_marks():
    kernel = ConnectionKernel(gamma=0.3, gamma_prime=0.2, delta=4.0)
    assert kernel.probability(0.1, 0.7, 1.5, 2) == pytest.approx(kernel.probability(0.7, 0.1, 1.5, 2))


def test_profile_integral_and_tail():
    kernel = ConnectionKernel(delta=2.0)
    assert kernel.profile_integral() == pytest.approx(2.0)
    assert float(kernel.profile_tail(0.0)) == pytest.approx(2.0)
    assert float(kernel.profile_tail(4.0)) == pytest.approx(0.25)
    assert float(ConnectionKernel(amplitude=3.0).profile_tail(1.0)) == pytest.approx(2.0)


def test_ball_volume():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_inverse_mark_moment():
    assert inverse_mark_moment(0.0, 0.0) == pytest.approx(1.0)
    # min of two uniforms has density 2(1 - m)
    assert inverse_mark_moment(0.5, 0.0) == pytest.approx(8.0 / 3.0, rel=1e-6)
    with pytest.raises(ParameterError):
        inverse_mark_moment(1.0, 0.0)


@pytest.mark.parametrize(
    "kernel",
    [
        ConnectionKernel(),
        ConnectionKernel(gamma=0.5),
        ConnectionKernel(gamma=0.3, delta=3.0),
        ConnectionKernel(gamma=0.2, gamma_prime=0.5, delta=2.5, amplitude=2.0),
        ConnectionKernel(delta=1.5, amplitude=0.5),
    ],
)
def test_probability_never_increases_with_distance(kernel):
    rng = np.random.default_rng(5)
    dist = np.linspace(0.0, 30.0, 600)
    for u_a, u_b in rng.uniform(1e-6, 1.0, size=(50, 2)):
        for dim in (1, 2, 3):
            p = kernel.probability(u_a, u_b, dist, dim)
            assert np.all((p >= 0.0) & (p <= 1.0))
            assert np.all(np.diff(p) <= 0.0)
