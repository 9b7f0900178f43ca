"""
Models - edge generators for the spatial random graph catalogue

Pair-independent kernels (WDRCM family, long-range percolation) draw one counter-based
uniform per pair, so every generator below produces the same law and the exact generator
produces the same realization for any vertex ordering.

Generators:
    exact     all pairs in row blocks, O(n^2)
    thinned   cell grid plus a dominating kernel per cell pair; proposals accepted with p/q
    boolean   radius queries for indicator kernels with gamma' = 0
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np
from scipy.integrate import quad

from chemdist.core.ellipses import ellipses_overlap
from chemdist.core.errors import BoundaryError, ParameterError, UsageError
from chemdist.core.graph import SpatialGraph
from chemdist.core.kernels import ConnectionKernel, ball_volume, inverse_mark_moment, zeta
from chemdist.core.point_process import (
    MAX_POINTS,
    Box,
    MarkedPointCloud,
    Window,
    extend_poisson,
    sample_poisson,
    sample_site_lattice,
)
from chemdist.core.seeding import mix_seed, pair_uniforms, philox_generator

if TYPE_CHECKING:
    from chemdist.core.config import ModelSpec

logger = logging.getLogger(__name__)

STREAM_EDGES = 11
STREAM_THINNING = 12

EXACT_LIMIT = 1500
PAIR_BLOCK = 2_000_000
POINTS_PER_CELL = 32
DENSE_THRESHOLD = 0.25
MISSING_EDGE_TARGET = 1e-2
# expected points of a window grown for interference balls
INTERFERENCE_POINT_CAP = MAX_POINTS // 10

ProbabilityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InterferenceParams:
    beta: float
    base_kernel: ConnectionKernel

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.base_kernel.gamma_prime != 0.0:
            raise ParameterError("interference base kernel must have gamma_prime = 0")

    def radius(self, marks: np.ndarray, dim: int) -> np.ndarray:
        """Interference radius u^(-beta/d): z interferes with x iff |x - z|^d < u_x^-beta."""
        return np.power(np.asarray(marks, dtype=float), -self.beta / dim)


@dataclass(frozen=True)
class EllipseParams:
    gamma: float

    def __post_init__(self):
        if not (0.0 < self.gamma < 2.0) or self.gamma == 1.0:
            raise ParameterError(f"ellipse gamma must lie in (0, 1) or (1, 2), got {self.gamma}")

    @property
    def tail_index(self) -> float:
        """Pareto index 2/gamma of the major axis."""
        return 2.0 / self.gamma

    def major_axes(self, marks: np.ndarray) -> np.ndarray:
        """Pareto(2/gamma) semi-major axes u^(-gamma/2), minimum 1."""
        return np.power(np.asarray(marks, dtype=float), -self.gamma / 2.0)


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(c) for c in counts."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - starts


def _distances(positions: np.ndarray, ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
    return np.linalg.norm(positions[ia] - positions[ib], axis=1)


def _kernel_probability(cloud: MarkedPointCloud, kernel: ConnectionKernel) -> ProbabilityFn:
    pos, marks, dim = cloud.positions, cloud.marks, cloud.dim

    def probability(ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
        return kernel.probability(marks[ia], marks[ib], _distances(pos, ia, ib), dim)

    return probability


def _pair_uniform_fn(cloud: MarkedPointCloud, seed: int) -> ProbabilityFn:
    edge_seed = mix_seed(seed, STREAM_EDGES)
    keys = cloud.keys

    def uniforms(ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
        return pair_uniforms(edge_seed, keys[ia], keys[ib])

    return uniforms


def exact_pairs(cloud: MarkedPointCloud, probability: ProbabilityFn, seed: int) -> np.ndarray:
    """Reference generator: one Bernoulli per unordered pair."""
    n = len(cloud)
    uniforms = _pair_uniform_fn(cloud, seed)
    found = []
    block = max(1, PAIR_BLOCK // max(n, 1))
    for start in range(0, n, block):
        rows = np.arange(start, min(n, start + block), dtype=np.int64)
        counts = n - 1 - rows
        ia = np.repeat(rows, counts)
        ib = ia + 1 + _ragged_arange(counts)
        if len(ia) == 0:
            continue
        keep = uniforms(ia, ib) < probability(ia, ib)
        found.append(np.stack([ia[keep], ib[keep]], axis=1))
    return np.concatenate(found) if found else np.empty((0, 2), dtype=np.int64)


class _CellGrid:
    """Occupied cells of a uniform grid over the padded window, points sorted by (cell, key)."""

    def __init__(self, cloud: MarkedPointCloud, points_per_cell: int):
        box = cloud.window.padded_box
        n = len(cloud)
        dim = cloud.dim
        cell = (points_per_cell * box.volume / max(n, 1)) ** (1.0 / dim)
        per_axis = max(1, int(box.side // cell))
        self.width = box.side / per_axis
        coords = np.floor((cloud.positions - box.lower) / self.width).astype(np.int64)
        coords = np.clip(coords, 0, per_axis - 1)
        cell_id = np.ravel_multi_index(coords.T, (per_axis,) * dim) if n else np.empty(0, dtype=np.int64)

        self.order = np.lexsort((cloud.keys, cell_id))
        sorted_ids = cell_id[self.order]
        ids, self.starts, self.counts = np.unique(sorted_ids, return_index=True, return_counts=True)
        self.coords = np.stack(np.unravel_index(ids, (per_axis,) * dim), axis=1)
        marks = cloud.marks[self.order]
        self.min_mark = np.minimum.reduceat(marks, self.starts) if n else np.empty(0)

    def __len__(self) -> int:
        return len(self.starts)

    def gap(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Smallest distance between points of cells a and b."""
        steps = np.maximum(np.abs(self.coords[a] - self.coords[b]) - 1, 0)
        return np.linalg.norm(steps * self.width, axis=1)


def thinned_pairs(
    cloud: MarkedPointCloud,
    probability: ProbabilityFn,
    bound: Callable[[np.ndarray, np.ndarray], np.ndarray],
    seed: int,
) -> np.ndarray:
    """
    Accelerated generator with the law of exact_pairs.

    For each pair of occupied cells, q = bound(smallest mark, smallest distance) dominates every
    pair probability. Cell pairs with q >= DENSE_THRESHOLD (and every cell with itself) are
    enumerated with the counter-based pair uniforms. For the rest, K ~ Binomial(N, q) candidate
    pairs are drawn as a uniform K-subset and accepted with probability p/q.
    """
    n = len(cloud)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    grid = _CellGrid(cloud, POINTS_PER_CELL)
    order = grid.order
    uniforms = _pair_uniform_fn(cloud, seed)
    rng = philox_generator(mix_seed(seed, STREAM_THINNING))
    cells = len(grid)
    found = []

    block = max(1, PAIR_BLOCK // max(cells, 1))
    for start in range(0, cells, block):
        rows = np.arange(start, min(cells, start + block), dtype=np.int64)
        counts = cells - rows
        a = np.repeat(rows, counts)
        b = a + _ragged_arange(counts)
        floor = np.minimum(grid.min_mark[a], grid.min_mark[b])
        q = np.minimum(1.0, bound(floor, grid.gap(a, b)))
        na, nb = grid.counts[a], grid.counts[b]
        same = a == b
        pair_total = np.where(same, na * (na - 1) // 2, na * nb)
        live = (q > 0) & (pair_total > 0)
        dense = live & (same | (q >= DENSE_THRESHOLD))
        sparse = live & ~dense

        if dense.any():
            found.append(_dense_block(grid, a[dense], b[dense], order, probability, uniforms))
        if sparse.any():
            found.append(_sparse_block(grid, a[sparse], b[sparse], q[sparse], order, probability, rng))
    found = [f for f in found if len(f)]
    return np.concatenate(found) if found else np.empty((0, 2), dtype=np.int64)


def _dense_block(grid, a, b, order, probability, uniforms) -> np.ndarray:
    sizes = grid.counts[a] * grid.counts[b]
    cum = np.cumsum(sizes)
    out = []
    lo = 0
    while lo < len(a):
        # chunks of about PAIR_BLOCK enumerated pairs
        base = cum[lo - 1] if lo else 0
        hi = max(lo + 1, int(np.searchsorted(cum, base + PAIR_BLOCK, side="right")))
        ca, cb = a[lo:hi], b[lo:hi]
        cn_b = grid.counts[cb]
        csize = grid.counts[ca] * cn_b
        local = _ragged_arange(csize)
        rep_b = np.repeat(cn_b, csize)
        li = local // rep_b
        lj = local % rep_b
        same = np.repeat(ca == cb, csize)
        keep = ~same | (li < lj)
        si = np.repeat(grid.starts[ca], csize)[keep] + li[keep]
        sj = np.repeat(grid.starts[cb], csize)[keep] + lj[keep]
        ia, ib = order[si], order[sj]
        hit = uniforms(ia, ib) < probability(ia, ib)
        out.append(np.stack([ia[hit], ib[hit]], axis=1))
        lo = hi
    return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def _sparse_block(grid, a, b, q, order, probability, rng) -> np.ndarray:
    na, nb = grid.counts[a], grid.counts[b]
    total = na * nb
    wanted = rng.binomial(total, q)
    hit = wanted > 0
    if not hit.any():
        return np.empty((0, 2), dtype=np.int64)
    a, b, q, nb, total, wanted = a[hit], b[hit], q[hit], nb[hit], total[hit], wanted[hit]
    offsets = np.cumsum(total) - total

    # uniform K-subset per cell pair: draw with replacement, keep distinct, top up the deficit
    chosen = np.empty(0, dtype=np.int64)
    deficit = wanted.copy()
    while deficit.sum() > 0:
        owner = np.repeat(np.arange(len(a)), deficit)
        draw = offsets[owner] + rng.integers(0, total[owner])
        chosen = np.unique(np.concatenate([chosen, draw]))
        have = np.bincount(np.searchsorted(offsets, chosen, side="right") - 1, minlength=len(a))
        deficit = wanted - have

    owner = np.searchsorted(offsets, chosen, side="right") - 1
    local = chosen - offsets[owner]
    si = grid.starts[a[owner]] + local // nb[owner]
    sj = grid.starts[b[owner]] + local % nb[owner]
    ia, ib = order[si], order[sj]
    accept = rng.random(len(ia)) < probability(ia, ib) / q[owner]
    return np.stack([ia[accept], ib[accept]], axis=1)


def _kernel_bound(kernel: ConnectionKernel, dim: int):
    exponent = kernel.gamma + kernel.gamma_prime

    def bound(mark_floor: np.ndarray, gap: np.ndarray) -> np.ndarray:
        return kernel.rho(np.power(mark_floor, exponent) * np.power(gap, dim))

    return bound


def _choose_method(method: str, n: int) -> str:
    if method not in ("auto", "exact", "thinned"):
        raise ParameterError(f"unknown generation method {method!r}")
    if method == "auto":
        return "exact" if n <= EXACT_LIMIT else "thinned"
    return method


def _generate(cloud, probability, bound, seed, method) -> np.ndarray:
    if _choose_method(method, len(cloud)) == "exact":
        return exact_pairs(cloud, probability, seed)
    return thinned_pairs(cloud, probability, bound, seed)


def _radius_pairs(cloud: MarkedPointCloud, radii: np.ndarray) -> np.ndarray:
    """Pairs (i, j) with |x_i - x_j| <= radii[i]."""
    if len(cloud) < 2:
        return np.empty((0, 2), dtype=np.int64)
    hits = cloud.tree.query_ball_point(cloud.positions, r=radii, return_sorted=False)
    lengths = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
    if lengths.sum() == 0:
        return np.empty((0, 2), dtype=np.int64)
    ia = np.repeat(np.arange(len(cloud), dtype=np.int64), lengths)
    ib = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if len(h)])
    return np.stack([ia, ib], axis=1)


def connect_boolean(cloud: MarkedPointCloud, gamma: float, amplitude: float = 1.0) -> SpatialGraph:
    """
    Boolean model: ball of radius r_x = (amplitude u_x^-gamma)^(1/d) at each vertex, edge iff the
    centre of the smaller ball lies in the larger one, i.e. |x - y| <= max(r_x, r_y).
    """
    kernel = ConnectionKernel(gamma, 0.0, math.inf, amplitude)
    if amplitude == 0.0 or len(cloud) < 2:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    radii = np.power(kernel.amplitude * np.power(cloud.marks, -gamma), 1.0 / cloud.dim)
    return SpatialGraph(cloud, _radius_pairs(cloud, radii))


def connect_gilbert(cloud: MarkedPointCloud, amplitude: float = 1.0) -> SpatialGraph:
    """Gilbert graph: edge iff |x - y|^d <= amplitude."""
    if amplitude == 0.0 or len(cloud) < 2:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    radius = amplitude ** (1.0 / cloud.dim)
    pairs = cloud.tree.query_pairs(r=radius, output_type="ndarray")
    return SpatialGraph(cloud, pairs)


def connect_wdrcm(cloud: MarkedPointCloud, kernel: ConnectionKernel, seed: int, method: str = "auto") -> SpatialGraph:
    """
    Weight-dependent random connection model.

    Args:
        cloud: Marked point cloud
        kernel: Connection kernel
        seed: Edge seed
        method: 'exact', 'thinned' or 'auto'

    Returns:
        SpatialGraph
    """
    if len(cloud) == 0:
        raise UsageError("cannot connect an empty cloud")
    if kernel.profile == "indicator" and kernel.gamma_prime == 0.0:
        if kernel.gamma == 0.0:
            return connect_gilbert(cloud, kernel.amplitude)
        return connect_boolean(cloud, kernel.gamma, kernel.amplitude)
    if kernel.amplitude == 0.0:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    edges = _generate(cloud, _kernel_probability(cloud, kernel), _kernel_bound(kernel, cloud.dim), seed, method)
    return SpatialGraph(cloud, edges)


def connect_long_range_percolation(
    cloud: MarkedPointCloud, delta: float, amplitude: float, seed: int, method: str = "auto"
) -> SpatialGraph:
    """Long-range percolation on a lattice cloud: p = min(1, amplitude |x - y|^(-d delta))."""
    if not cloud.lattice:
        raise UsageError("long-range percolation needs a lattice cloud")
    if not math.isfinite(delta):
        raise ParameterError("long-range percolation needs a finite delta")
    kernel = ConnectionKernel(0.0, 0.0, delta, amplitude)
    if kernel.amplitude == 0.0 or len(cloud) < 2:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    edges = _generate(cloud, _kernel_probability(cloud, kernel), _kernel_bound(kernel, cloud.dim), seed, method)
    return SpatialGraph(cloud, edges)


def interference_counts(cloud: MarkedPointCloud, params: InterferenceParams) -> np.ndarray:
    """#{z in cloud : |x - z| < u_x^(-beta/d)} per vertex, x itself included."""
    if len(cloud) == 0:
        return np.empty(0, dtype=np.int64)
    radius = params.radius(cloud.marks, cloud.dim)
    strict = np.nextafter(radius, 0.0)
    return np.asarray(cloud.tree.query_ball_point(cloud.positions, r=strict, return_length=True), dtype=np.int64)


def check_interference_boundary(cloud: MarkedPointCloud, params: InterferenceParams) -> None:
    """Every vertex of the measurement box must have its interference ball inside the padded window."""
    window = cloud.window
    idx = cloud.inside(window.box)
    if len(idx) == 0:
        return
    padded = window.padded_box
    radius = params.radius(cloud.marks[idx], cloud.dim)[:, None]
    pos = cloud.positions[idx]
    outside = np.any((pos - radius < padded.lower) | (pos + radius > padded.upper), axis=1)
    if outside.any():
        raise BoundaryError(
            f"{int(outside.sum())} interference balls leave the padded window "
            f"(largest radius {float(radius[outside].max()):.3g}, pad {window.pad:.3g}); increase pad"
        )


def interference_reach(cloud: MarkedPointCloud, params: InterferenceParams, core: Box) -> float:
    """Largest interference radius among the vertices of `core` (0 when it is empty)."""
    idx = cloud.inside(core)
    if len(idx) == 0:
        return 0.0
    return float(params.radius(cloud.marks[idx], cloud.dim).max())


def interference_pad_cap(window: Window, intensity: float) -> float:
    """Largest pad whose padded window holds at most INTERFERENCE_POINT_CAP expected points."""
    outer = (INTERFERENCE_POINT_CAP / intensity) ** (1.0 / window.dim)
    return max(window.pad, (outer - window.side) / 2.0)


def connect_interference(
    cloud: MarkedPointCloud, params: InterferenceParams, seed: int, method: str = "auto", strict: bool = True
) -> SpatialGraph:
    """
    Soft Boolean model with local interference.

    For u_x < u_y the pair connects with probability
        min(1, A (u_x^gamma |x - y|^d)^-delta) / #{z : |x - z|^d < u_x^-beta},
    the count including x itself. Margin vertices use counts over the generated cloud.
    With strict=False a ball leaving the padded window is counted over the window only.
    """
    if len(cloud) == 0:
        raise UsageError("cannot connect an empty cloud")
    if strict:
        check_interference_boundary(cloud, params)
    counts = interference_counts(cloud, params)
    kernel = params.base_kernel
    pos, marks, keys, dim = cloud.positions, cloud.marks, cloud.keys, cloud.dim

    def probability(ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
        # ties in marks broken by vertex key
        a_lower = (marks[ia] < marks[ib]) | ((marks[ia] == marks[ib]) & (keys[ia] < keys[ib]))
        lower = np.where(a_lower, ia, ib)
        bare = kernel.rho(marks[lower] ** kernel.gamma * _distances(pos, ia, ib) ** dim)
        return bare / counts[lower]

    if kernel.amplitude == 0.0:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    edges = _generate(cloud, probability, _kernel_bound(kernel, dim), seed, method)
    logger.debug("Interference graph: %d edges, mean count %.2f", len(edges), float(counts.mean()))
    return SpatialGraph(cloud, edges)


def connect_ellipses(cloud: MarkedPointCloud, params: EllipseParams, seed: int = 0) -> SpatialGraph:
    """
    Ellipses percolation: semi-axes (u^(-gamma/2), 1), edge iff the closed ellipses intersect.
    Deterministic given the cloud; `seed` is accepted for a uniform generator signature.
    """
    if cloud.dim != 2:
        raise UsageError("ellipses percolation is planar")
    if cloud.orientations is None:
        raise UsageError("ellipses percolation needs orientations on the cloud")
    if len(cloud) < 2:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    major = params.major_axes(cloud.marks)
    # an intersecting pair has |x - y| <= a_x + a_y <= 2 max(a_x, a_y)
    candidates = _radius_pairs(cloud, 2.0 * major)
    lo = np.minimum(candidates[:, 0], candidates[:, 1])
    hi = np.maximum(candidates[:, 0], candidates[:, 1])
    keep = lo != hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0).reshape(-1, 2)
    if len(pairs) == 0:
        return SpatialGraph(cloud, pairs)
    ia, ib = pairs[:, 0], pairs[:, 1]
    near = _distances(cloud.positions, ia, ib) <= major[ia] + major[ib]
    ia, ib = ia[near], ib[near]
    ones = np.ones(len(ia))
    hit = ellipses_overlap(
        cloud.positions[ia], np.stack([major[ia], ones], axis=1), cloud.orientations[ia],
        cloud.positions[ib], np.stack([major[ib], ones], axis=1), cloud.orientations[ib],
    )
    return SpatialGraph(cloud, np.stack([ia[hit], ib[hit]], axis=1))


def profile_integral(kernel: ConnectionKernel) -> float:
    """Integral of rho over (0, inf) by quadrature, split at the kink."""
    if kernel.amplitude == 0.0:
        return 0.0
    kink = kernel.kink
    head, _ = quad(lambda t: float(kernel.rho(t)), 0.0, kink, epsabs=0.0, epsrel=1e-10)
    if kernel.profile == "indicator":
        return head
    tail, _ = quad(lambda t: float(kernel.rho(t)), kink, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return head + tail


def expected_degree(kernel: ConnectionKernel, intensity: float, dim: int) -> float:
    """
    Mean degree of a vertex with a typical mark under a Poisson vertex set:
        lambda * int_{R^d} int int rho((u ^ v)^gamma (u v v)^gamma' |z|^d) du dv dz.

    The radial substitution s = |z|^d factorizes the integral into
        lambda * V_d * int_0^inf rho(s) ds * E[1 / ((U ^ V)^gamma (U v V)^gamma')].
    """
    if not intensity > 0:
        raise ParameterError(f"intensity must be positive, got {intensity}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    return intensity * ball_volume(dim) * profile_integral(kernel) * inverse_mark_moment(kernel.gamma, kernel.gamma_prime)


@lru_cache(maxsize=256)
def kernel_tail_degree(kernel: ConnectionKernel, intensity: float, dim: int, radius: float) -> float:
    """Expected number of neighbours of a typical vertex at distance > radius."""
    if kernel.amplitude == 0.0:
        return 0.0
    base = radius ** dim
    g, gp = kernel.gamma, kernel.gamma_prime
    kink = kernel.kink
    indicator = kernel.profile == "indicator"

    def smooth_part(u: float, v: float) -> float:
        # integrand without its u^-gamma factor
        c = u ** g * v ** gp
        return float(kernel.profile_tail(c * base)) / v ** gp

    def inner(v: float) -> float:
        if g == 0.0:
            return v * smooth_part(1.0, v)
        u_star = (kink / (v ** gp * base)) ** (1.0 / g) if base > 0 else math.inf
        upper = min(v, u_star) if indicator else v
        if upper <= 0.0:
            return 0.0
        split = min(u_star, upper)
        total, _ = quad(smooth_part, 0.0, split, args=(v,), weight="alg", wvar=(-g, 0.0))
        if split < upper:
            rest, _ = quad(lambda u: smooth_part(u, v) * u ** (-g), split, upper, epsabs=0.0, epsrel=1e-8)
            total += rest
        return total

    value, _ = quad(inner, 0.0, 1.0, epsabs=1e-300, epsrel=1e-6, limit=200)
    return 2.0 * intensity * ball_volume(dim) * value


def _kernel_pad(kernel: ConnectionKernel, density: float, dim: int, side: float, max_pad: float) -> float:
    volume = side ** dim

    def missing(pad: float) -> float:
        return density * volume * kernel_tail_degree(kernel, density, dim, pad)

    if missing(max_pad) >= MISSING_EDGE_TARGET:
        logger.warning(
            "Auto pad capped at %.3g: %.3g expected missing edges per replicate exceeds %.0e",
            max_pad, missing(max_pad), MISSING_EDGE_TARGET,
        )
        return max_pad
    lo, hi = 0.0, max_pad
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if missing(mid) < MISSING_EDGE_TARGET:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-3 * max(1.0, hi):
            break
    return hi


def _ellipse_missing(params: EllipseParams, density: float, side: float, pad: float) -> float:
    """Bound on ellipse pairs across the pad: one endpoint needs a semi-major axis above pad/2."""
    alpha = params.tail_index
    h = pad / 2.0
    inner = side ** 2 * h ** (-alpha)
    ring = 8.0 * side * h ** (1.0 - alpha) / (alpha - 1.0)
    corner = 32.0 * h ** (2.0 - alpha) / (alpha - 2.0)
    return density * (inner + ring + corner)


def auto_pad(spec: "ModelSpec", side: float, max_pad: Optional[float] = None) -> float:
    """
    Boundary margin so that fewer than 1e-2 edges per replicate between the measurement box and
    the region beyond the pad are expected to be missing. Capped at max_pad (default 2 * side).

    The interference model gets the kernel margin here; realize grows it per replicate until
    the interference balls of the padded window fit.
    """
    max_pad = 2.0 * side if max_pad is None else max_pad
    if spec.model == "ellipses":
        params = spec.ellipse_params()
        if params.gamma >= 1.0 or _ellipse_missing(params, spec.density, side, max(max_pad, 1e-9)) >= MISSING_EDGE_TARGET:
            logger.warning("Auto pad capped at %.3g for ellipses with gamma=%g", max_pad, params.gamma)
            return max_pad
        lo, hi = 0.0, max_pad
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid > 0 and _ellipse_missing(params, spec.density, side, mid) < MISSING_EDGE_TARGET:
                hi = mid
            else:
                lo = mid
        return hi
    return _kernel_pad(spec.kernel(), spec.density, spec.dim, side, max_pad)


def resolve_pad(spec: "ModelSpec", side: float, internal_only: bool = False) -> float:
    """
    Explicit pad, or the automatic one for the given use. Events reading only edges internal
    to the measurement box need no margin.
    """
    if spec.pad != "auto":
        return float(spec.pad)
    return 0.0 if internal_only else auto_pad(spec, side)


@dataclass(frozen=True)
class ModelExponents:
    """Predicted exponents; NaN where no prediction applies."""

    dim: int
    zeta: float
    mu: float
    xi: float

    @property
    def d_zeta(self) -> float:
        return self.dim * self.zeta

    @property
    def d_plus_mu(self) -> float:
        return self.dim + self.mu

    @property
    def rate(self) -> float:
        """Decay exponent xi v (d + mu) of P(not D)."""
        if math.isnan(self.xi) or math.isnan(self.mu):
            return math.nan
        return max(self.xi, self.d_plus_mu)


def model_exponents(spec: "ModelSpec") -> ModelExponents:
    """zeta, mu = d(zeta - 1) and mixing exponent xi for each catalogue model."""
    d = spec.dim
    if spec.model == "ellipses":
        params = spec.ellipse_params()
        mu = -params.tail_index if params.gamma < 1.0 else math.nan
        return ModelExponents(dim=d, zeta=math.nan, mu=mu, xi=math.nan)
    if spec.model == "lrp":
        z = 2.0 - spec.delta
        return ModelExponents(dim=d, zeta=z, mu=d * (z - 1.0), xi=-math.inf)
    z = zeta(spec.delta, spec.gamma, spec.gamma_prime)
    if spec.model == "interference":
        # the bare kernel dominates the interference-thinned one
        return ModelExponents(dim=d, zeta=z, mu=d * (z - 1.0), xi=1.0 - 1.0 / spec.beta)
    return ModelExponents(dim=d, zeta=z, mu=d * (z - 1.0), xi=-math.inf)


def build_cloud(spec: "ModelSpec", window: Window, seed: int) -> MarkedPointCloud:
    if spec.is_lattice:
        return sample_site_lattice(window, spec.retention, seed)
    return sample_poisson(window, spec.intensity, seed, oriented=spec.model == "ellipses")


def connect(spec: "ModelSpec", cloud: MarkedPointCloud, seed: int) -> SpatialGraph:
    """Dispatch a ModelSpec to its edge generator."""
    if spec.model == "ellipses":
        return connect_ellipses(cloud, spec.ellipse_params(), seed)
    if spec.model == "interference":
        return realize_interference(spec, cloud, seed)
    if spec.model == "lrp":
        return connect_long_range_percolation(cloud, spec.delta, spec.amplitude, seed, spec.method)
    if spec.model == "gilbert":
        return connect_gilbert(cloud, spec.amplitude)
    if spec.model == "boolean":
        return connect_boolean(cloud, spec.gamma, spec.amplitude)
    return connect_wdrcm(cloud, spec.kernel(), seed, spec.method)


def realize_interference(spec: "ModelSpec", cloud: MarkedPointCloud, seed: int) -> SpatialGraph:
    """
    Interference graph on a cloud grown until the interference ball of every vertex in the
    padded window lies inside the new padded window. Growth stops at interference_pad_cap;
    past it the largest balls are counted over the window and a warning is logged.
    """
    params = spec.interference_params()
    window = cloud.window
    wanted = window.pad + interference_reach(cloud, params, window.padded_box)
    cap = interference_pad_cap(window, spec.intensity)
    pad = min(wanted, cap)
    if pad > window.pad:
        cloud = extend_poisson(cloud, pad)
    if wanted > cap:
        logger.warning("Interference pad %.3g capped at %.3g; counts of the largest balls are truncated", wanted, cap)
    return connect_interference(cloud, params, seed, spec.method, strict=wanted <= cap)


def realize(spec: "ModelSpec", window: Window, seed: int) -> SpatialGraph:
    """Cloud and edges for one replicate; an empty cloud yields an empty graph."""
    cloud = build_cloud(spec, window, seed)
    if len(cloud) == 0:
        return SpatialGraph(cloud, np.empty((0, 2), dtype=np.int64))
    return connect(spec, cloud, seed)
