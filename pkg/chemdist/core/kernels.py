"""
Kernels - weight-dependent connection kernels and their closed-form pieces

A kernel connects x and y with probability rho((u_x ^ u_y)^gamma (u_x v u_y)^gamma' |x-y|^d).
Profiles:
    polynomial  rho(t) = min(1, A t^-delta)
    indicator   rho(t) = 1[t <= A]      (delta = inf)
"""
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import quad

from chemdist.core.errors import ParameterError

INF = math.inf


def parse_delta(value: Union[str, float, int]) -> float:
    """Accept a number or the string 'inf'."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        try:
            return float(value)
        except ValueError:
            raise ParameterError(f"delta must be a number or 'inf', got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ConnectionKernel:
    gamma: float = 0.0
    gamma_prime: float = 0.0
    delta: float = INF
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "delta", parse_delta(self.delta))
        if not (0.0 <= self.gamma < 1.0):
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not (0.0 <= self.gamma_prime < 2.0 - self.gamma):
            raise ParameterError(f"gamma_prime must lie in [0, 2 - gamma), got {self.gamma_prime}")
        if not self.delta > 1.0 or math.isnan(self.delta):
            raise ParameterError(f"delta must exceed 1 (or be inf), got {self.delta}")
        if not (self.amplitude >= 0.0 and math.isfinite(self.amplitude)):
            raise ParameterError(f"amplitude must be a nonnegative number, got {self.amplitude}")

    @property
    def profile(self) -> str:
        return "indicator" if math.isinf(self.delta) else "polynomial"

    @property
    def kink(self) -> float:
        """Argument where rho leaves the value 1 (or drops to 0 for the indicator)."""
        if self.profile == "indicator":
            return self.amplitude
        return self.amplitude ** (1.0 / self.delta)

    def rho(self, t):
        """Profile function, vectorized over t >= 0."""
        t = np.asarray(t, dtype=float)
        if self.profile == "indicator":
            return (t <= self.amplitude).astype(float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            value = self.amplitude * np.power(t, -self.delta)
        return np.minimum(1.0, np.where(t > 0, value, 1.0 if self.amplitude > 0 else 0.0))

    def argument(self, u_a, u_b, dist, dim: int):
        """Kernel argument (u ^ v)^gamma (u v v)^gamma' r^d."""
        u_a = np.asarray(u_a, dtype=float)
        u_b = np.asarray(u_b, dtype=float)
        lo = np.minimum(u_a, u_b)
        hi = np.maximum(u_a, u_b)
        return lo ** self.gamma * hi ** self.gamma_prime * np.asarray(dist, dtype=float) ** dim

    def probability(self, u_a, u_b, dist, dim: int):
        """Connection probability of a pair; symmetric in (u_a, u_b)."""
        return self.rho(self.argument(u_a, u_b, dist, dim))

    def profile_integral(self) -> float:
        """Integral of rho over (0, inf)."""
        if self.profile == "indicator":
            return self.amplitude
        return self.kink * self.delta / (self.delta - 1.0)

    def profile_tail(self, x):
        """Integral of rho over (x, inf), vectorized."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.profile == "indicator":
            return np.maximum(self.amplitude - x, 0.0)
        if self.amplitude == 0.0:
            return np.zeros_like(x)
        k = self.kink
        with np.errstate(divide="ignore"):
            beyond = self.amplitude * np.power(np.maximum(x, k), 1.0 - self.delta) / (self.delta - 1.0)
        return np.maximum(k - x, 0.0) + beyond

    def with_amplitude(self, amplitude: float) -> "ConnectionKernel":
        return ConnectionKernel(self.gamma, self.gamma_prime, self.delta, amplitude)


def ball_volume(dim: int) -> float:
    """Volume of the unit Euclidean ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def inverse_mark_moment(gamma: float, gamma_prime: float) -> float:
    """
    E[1 / ((U ^ V)^gamma (U v V)^gamma')] for independent uniforms, by quadrature.

    Finite iff gamma < 1 and gamma + gamma' < 2.
    """
    if gamma >= 1.0 or gamma + gamma_prime >= 2.0:
        raise ParameterError(f"mark moment diverges for gamma={gamma}, gamma'={gamma_prime}")

    def inner(v: float) -> float:
        return quad(lambda u: 1.0, 0.0, v, weight="alg", wvar=(-gamma, 0.0))[0]

    value, _ = quad(lambda v: 2.0 * inner(v) * v ** (-gamma_prime), 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    return value


def _limit_ratio(numerator: float, denominator: float) -> float:
    """numerator / denominator with 0-denominator conventions: -inf if numerator < 0, NaN otherwise."""
    if denominator == 0.0:
        return -INF if numerator < 0 else math.nan
    return numerator / denominator


def zeta(delta: Union[float, str], gamma: float, gamma_prime: float) -> float:
    """
    Downward vertex-boundary exponent
        max{2 - delta, 1 - (delta-1)/(gamma delta), (gamma'+gamma-1)/gamma, 2(gamma'+gamma-1)/(gamma'+gamma)}.

    delta = inf gives 2 - delta = -inf and (delta-1)/delta -> 1. A zero denominator gives -inf for a
    negative numerator and NaN (undefined) otherwise; any NaN term makes the result NaN.
    """
    delta = parse_delta(delta)
    t1 = -INF if math.isinf(delta) else 2.0 - delta
    ratio = 1.0 if math.isinf(delta) else (delta - 1.0) / delta
    # 1 - ratio/gamma; ratio > 0 so gamma = 0 sends the term to -inf
    t2 = -INF if gamma == 0.0 else 1.0 - ratio / gamma
    t3 = _limit_ratio(gamma_prime + gamma - 1.0, gamma)
    t4 = _limit_ratio(2.0 * (gamma_prime + gamma - 1.0), gamma_prime + gamma)
    terms = (t1, t2, t3, t4)
    if any(math.isnan(t) for t in terms):
        return math.nan
    return max(terms)


def zeta_negative_region(delta: float, gamma: float, gamma_prime: float) -> bool:
    """delta > 2, gamma < 1 - 1/delta and gamma' < 1 - gamma."""
    delta = parse_delta(delta)
    return delta > 2.0 and gamma < 1.0 - 1.0 / delta and gamma_prime < 1.0 - gamma


def interference_zeta_negative(gamma: float, delta: float, beta: float) -> bool:
    """Negative-exponent region of the interference model: gamma < (delta + beta - 1)/delta."""
    delta = parse_delta(delta)
    if math.isinf(delta):
        return gamma < 1.0
    return gamma < (delta + beta - 1.0) / delta
