"""
Long Edges - the event L(m, n), its Monte Carlo probability and the quadrature oracle

L(m, n) occurs when some edge with both endpoints in the box of side m around the window
center is longer than n. Under the no-long-edges property its probability is at most
C_L m^d n^mu; for the WDRCM family P(L(m, m)) decays like m^(d zeta) when zeta < 0.
"""
import logging
import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.integrate import quad

from chemdist.core.config import ModelSpec
from chemdist.core.errors import ParameterError, UsageError
from chemdist.core.graph import SpatialGraph
from chemdist.core.kernels import ConnectionKernel, zeta
from chemdist.core.models import realize, resolve_pad
from chemdist.core.point_process import Box, Window
from chemdist.core.runner import map_replicates, replicate_seed
from chemdist.core.stats import ExponentFit, ProportionEstimate, fit_exponent, proportion

logger = logging.getLogger(__name__)

__all__ = [
    "LongEdgeCheck",
    "LongEdgeTail",
    "ExponentFit",
    "detect_L",
    "sample_long_edge",
    "estimate_P_L",
    "zeta",
    "bracket_integral",
    "fit_exponent",
    "long_edge_bound",
]


@dataclass(frozen=True)
class LongEdgeCheck:
    found: bool
    longest: float

    def __bool__(self) -> bool:
        return self.found


@dataclass(frozen=True)
class LongEdgeTail:
    """Assumed tail exponent mu and constant C_L of the no-long-edges bound."""

    mu: float
    C_L: float = 1.0

    def __post_init__(self):
        if not self.C_L > 0:
            raise ParameterError(f"C_L must be positive, got {self.C_L}")


def long_edge_bound(m: float, n: float, tail: LongEdgeTail, dim: int) -> float:
    """C_L m^d n^mu."""
    if not tail.mu < -dim:
        raise ParameterError(f"mu must be below -d = {-dim}, got {tail.mu}")
    return tail.C_L * m ** dim * n ** tail.mu


def detect_L(graph: SpatialGraph, m: float, n: float) -> LongEdgeCheck:
    """
    Whether an edge internal to the box of side m around the window center is longer than n.

    Returns:
        LongEdgeCheck with the verdict and the longest internal edge length (0 without edges)
    """
    window = graph.cloud.window
    box = Box(window.center, m)
    if not window.box.contains_box(box):
        raise UsageError(f"box of side {m} exceeds the measurement window of side {window.side}")
    if graph.edge_count == 0:
        return LongEdgeCheck(False, 0.0)
    lengths = graph.edge_lengths[graph.internal_edges(box)]
    longest = float(lengths.max()) if len(lengths) else 0.0
    return LongEdgeCheck(longest > n, longest)


def long_edge_window(spec: ModelSpec, m: float) -> Window:
    """Measurement window of side m; only the local pad is needed for internal edges."""
    return Window(dim=spec.dim, side=m, pad=resolve_pad(spec, m, internal_only=True))


def sample_long_edge(spec: ModelSpec, m: float, n: float, seed: int, index: int) -> LongEdgeCheck:
    """One replicate of L(m, n)."""
    graph = realize(spec, long_edge_window(spec, m), replicate_seed(seed, index))
    return detect_L(graph, m, n)


def estimate_P_L(spec: ModelSpec, m: float, n: float, replicates: int, seed: int) -> ProportionEstimate:
    """
    Monte Carlo estimate of P(L(m, n)) over independent replicates.

    Args:
        spec: Model
        m: Box side
        n: Edge length threshold
        replicates: Number of replicates (>= 100 recommended)
        seed: Master seed

    Returns:
        ProportionEstimate with a Wilson interval
    """
    if replicates < 1:
        raise ParameterError(f"replicates must be positive, got {replicates}")
    if replicates < 100:
        logger.warning("Only %d replicates for P(L(%g, %g))", replicates, m, n)
    task = partial(sample_long_edge, spec, m, n, seed)
    successes = sum(bool(check) for check in map_replicates(task, range(replicates)))
    return proportion(successes, replicates)


def _inner_integral(kernel: ConnectionKernel, v: float, u0: float, scale: float) -> float:
    """
    Integral over u in [u0, v] of rho(u^gamma v^gamma' r^d), in closed form.

    `scale` is r^d. Below u_k = (kink / (v^gamma' r^d))^(1/gamma) the profile equals 1
    (the indicator drops to 0 above it).
    """
    if v <= u0:
        return 0.0
    g, gp = kernel.gamma, kernel.gamma_prime
    c = v ** gp * scale
    if g == 0.0:
        return (v - u0) * float(kernel.rho(c))
    u_k = (kernel.kink / c) ** (1.0 / g)
    flat = max(0.0, min(v, u_k) - u0)
    if kernel.profile == "indicator":
        return flat
    lo = max(u0, u_k)
    if lo >= v:
        return flat
    power = 1.0 - g * kernel.delta
    coef = kernel.amplitude * c ** (-kernel.delta)
    if power == 0.0:
        return flat + coef * math.log(v / lo)
    return flat + coef * (v ** power - lo ** power) / power


def bracket_integral(kernel: ConnectionKernel, r: float, dim: int) -> float:
    """
    r^(2d) times the integral of rho((u ^ v)^gamma (u v v)^gamma' r^d) over [u0, 1]^2,
    u0 = r^(d (zeta - 1)).

    The integrand is symmetric, so the value is twice the integral over u < v. The inner
    integral is exact; the outer one is adaptive quadrature in log v with the profile kinks
    as break points.
    """
    if not r > 1:
        raise ParameterError(f"r must exceed 1, got {r}")
    z = zeta(kernel.delta, kernel.gamma, kernel.gamma_prime)
    if math.isnan(z):
        raise ParameterError(
            f"zeta undefined for delta={kernel.delta}, gamma={kernel.gamma}, gamma'={kernel.gamma_prime}"
        )
    if kernel.amplitude == 0.0:
        return 0.0
    scale = r ** dim
    # zeta = -inf puts the lower limit at 0
    u0 = r ** (dim * (z - 1.0)) if math.isfinite(z) else 0.0
    g, gp = kernel.gamma, kernel.gamma_prime
    kink = kernel.kink

    breaks = []
    if g + gp > 0:
        # u_k(v) = v
        breaks.append((kink / scale) ** (1.0 / (g + gp)))
    if g > 0 and gp > 0 and u0 > 0:
        # u_k(v) = u0
        breaks.append((kink / (u0 ** g * scale)) ** (1.0 / gp))
    if g == 0 and gp > 0:
        breaks.append((kink / scale) ** (1.0 / gp))

    s_lo = math.log(u0) if u0 > 0 else math.log(np.finfo(float).tiny)
    points = sorted(math.log(b) for b in breaks if b > 0 and s_lo < math.log(b) < 0.0)

    def outer(s: float) -> float:
        v = math.exp(s)
        return _inner_integral(kernel, v, u0, scale) * v

    value, _ = quad(outer, s_lo, 0.0, points=points or None, epsabs=0.0, epsrel=1e-9, limit=400)
    return r ** (2 * dim) * 2.0 * value


def bracket_slope(kernel: ConnectionKernel, radii, dim: int, log_corrected: bool = False) -> ExponentFit:
    """
    Log-log slope of bracket_integral over `radii`.

    With log_corrected the values are divided by log r first, which removes the logarithmic
    factor appearing when two terms of the zeta formula tie.
    """
    points = []
    for r in radii:
        value = bracket_integral(kernel, r, dim)
        points.append((r, value / math.log(r) if log_corrected else value))
    return fit_exponent(points)
