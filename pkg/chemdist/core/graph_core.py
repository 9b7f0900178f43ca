"""
Graph Core - chemical distances, the linear-distance event and distance-ratio profiles

Chemical distance is the hop count of a shortest path; unreachable pairs are at
UNREACHABLE (math.inf), following min over an empty set = inf.
"""
import csv
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse import csgraph

from chemdist.core.errors import ParameterError, UsageError
from chemdist.core.graph import SpatialGraph
from chemdist.core.point_process import Box
from chemdist.core.seeding import mix_seed, philox_generator

logger = logging.getLogger(__name__)

UNREACHABLE = math.inf
STREAM_PROFILE = 21


@dataclass(frozen=True)
class DistanceEventSpec:
    """Inner box side L, outer box side m and linearity constant eta."""

    L: float
    m: float
    eta: float

    def __post_init__(self):
        if not (0 < self.L < self.m):
            raise ParameterError(f"need 0 < L < m, got L={self.L}, m={self.m}")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class Witness:
    x: int
    y: int
    distance: float
    euclidean: float

    @property
    def ratio(self) -> float:
        return self.distance / self.euclidean


@dataclass(frozen=True)
class DEventResult:
    holds: bool
    witness: Optional[Witness] = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class ProfileRow:
    radius: float
    count: int
    median_ratio: float
    q25: float
    q75: float

    @property
    def empty(self) -> bool:
        return self.count == 0


def chemical_distance(graph: SpatialGraph, source: int, target: int) -> float:
    """Hop count of a shortest source-target path by level-synchronous BFS with early exit."""
    graph.check_vertex(source)
    graph.check_vertex(target)
    if source == target:
        return 0
    adj = graph.adjacency
    visited = np.zeros(graph.vertex_count, dtype=bool)
    visited[source] = True
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while len(frontier):
        level += 1
        reached = adj[frontier].indices
        fresh = np.unique(reached[~visited[reached]])
        if len(fresh) == 0:
            break
        if np.any(fresh == target):
            return level
        visited[fresh] = True
        frontier = fresh
    return UNREACHABLE


def distances_from(graph: SpatialGraph, source: int) -> np.ndarray:
    """Single-source hop counts indexed by vertex id; UNREACHABLE where disconnected."""
    graph.check_vertex(source)
    return multi_source_distances(graph, [source])[0]


def multi_source_distances(graph: SpatialGraph, sources: Sequence[int], limit: float = np.inf) -> np.ndarray:
    """Rows of hop counts, one per source; distances above `limit` are reported as UNREACHABLE."""
    sources = np.asarray(sources, dtype=np.int64)
    if len(sources) == 0:
        return np.empty((0, graph.vertex_count))
    for s in (sources.min(), sources.max()):
        graph.check_vertex(int(s))
    dist = csgraph.dijkstra(graph.adjacency, directed=False, indices=sources, unweighted=True, limit=limit)
    return np.atleast_2d(dist)


def _origin_box(graph: SpatialGraph, side: float) -> Box:
    return Box(graph.cloud.window.center, side)


def check_D_event(graph: SpatialGraph, spec: DistanceEventSpec) -> DEventResult:
    """
    Whether d(x, y) >= eta |x - y| for every vertex x in the inner box and every vertex y of the
    measurement window outside the outer box. On failure the witness is the pair with the
    smallest ratio d / |x - y|.
    """
    window = graph.cloud.window
    outer = _origin_box(graph, spec.m)
    if not window.box.contains_box(outer):
        raise UsageError(f"outer box of side {spec.m} does not fit the measurement window of side {window.side}")
    pos = graph.cloud.positions
    xs = graph.cloud.inside(_origin_box(graph, spec.L))
    if len(xs) == 0:
        return DEventResult(True)
    in_window = graph.cloud.inside(window.box)
    ys = in_window[~outer.contains(pos[in_window])] if len(in_window) else in_window
    if len(ys) == 0:
        return DEventResult(True)

    # a violation needs d < eta |x - y| <= eta * window diameter
    limit = spec.eta * window.side * math.sqrt(window.dim)
    dist = multi_source_distances(graph, xs, limit=limit)[:, ys]
    reachable = np.isfinite(dist)
    if not reachable.any():
        return DEventResult(True)
    rows, cols = np.nonzero(reachable)
    hops = dist[rows, cols]
    euclid = np.linalg.norm(pos[xs[rows]] - pos[ys[cols]], axis=1)
    ratio = hops / euclid
    bad = ratio < spec.eta
    if not bad.any():
        return DEventResult(True)
    k = np.flatnonzero(bad)[np.argmin(ratio[bad])]
    witness = Witness(int(xs[rows[k]]), int(ys[cols[k]]), float(hops[k]), float(euclid[k]))
    logger.debug("D event fails: d=%g, |x-y|=%.3f", witness.distance, witness.euclidean)
    return DEventResult(False, witness)


def sample_distance_ratios(
    graph: SpatialGraph, radii: Sequence[float], samples: int, seed: int
) -> List[List[float]]:
    """
    Ratios d(x, y) / |x - y| for up to `samples` pairs per radius with |x - y| in [r, 1.1 r].

    Sources are visited in a seeded random order; each contributes at most one pair per radius,
    with a uniformly chosen target in the same component inside the measurement window. Pairs
    are drawn without replacement.
    """
    if samples < 1:
        raise ParameterError(f"samples must be positive, got {samples}")
    window = graph.cloud.window
    limit = window.side * math.sqrt(window.dim)
    for r in radii:
        if not (0 < r and 1.1 * r <= limit):
            raise UsageError(f"radius {r} does not fit the measurement window")
    rng = philox_generator(mix_seed(seed, STREAM_PROFILE))
    inside = graph.cloud.inside(window.box)
    pos = graph.cloud.positions
    if len(inside) < 2:
        return [[] for _ in radii]
    _, labels = csgraph.connected_components(graph.adjacency, directed=False)
    in_window = np.zeros(graph.vertex_count, dtype=bool)
    in_window[inside] = True
    cache: Dict[int, np.ndarray] = {}

    out = []
    for r in radii:
        ratios: List[float] = []
        used = set()
        for x in rng.permutation(inside).tolist():
            if len(ratios) >= samples:
                break
            near = np.asarray(graph.cloud.tree.query_ball_point(pos[x], 1.1 * r), dtype=np.int64)
            if len(near) == 0:
                continue
            near = near[in_window[near] & (labels[near] == labels[x])]
            gap = np.linalg.norm(pos[near] - pos[x], axis=1)
            near = near[gap >= r]
            near = np.array([y for y in near.tolist() if (min(x, y), max(x, y)) not in used], dtype=np.int64)
            if len(near) == 0:
                continue
            y = int(near[rng.integers(0, len(near))])
            used.add((min(x, y), max(x, y)))
            if x not in cache:
                cache[x] = distances_from(graph, x)
            ratios.append(float(cache[x][y] / np.linalg.norm(pos[y] - pos[x])))
        out.append(ratios)
    return out


def summarize_ratios(radius: float, ratios: Sequence[float]) -> ProfileRow:
    """Median and quartiles of a ratio sample; an empty sample gives an empty row."""
    if len(ratios) == 0:
        logger.info("No connected pairs at radius %g", radius)
        return ProfileRow(float(radius), 0, math.nan, math.nan, math.nan)
    q25, med, q75 = np.percentile(np.asarray(ratios, dtype=float), [25, 50, 75])
    return ProfileRow(float(radius), len(ratios), float(med), float(q25), float(q75))


def distance_ratio_profile(
    graph: SpatialGraph, radii: Sequence[float], samples: int, seed: int
) -> List[ProfileRow]:
    """Quantiles of d(x, y) / |x - y| per radius; radii without any connected pair give an empty row."""
    samples_per_radius = sample_distance_ratios(graph, radii, samples, seed)
    return [summarize_ratios(r, ratios) for r, ratios in zip(radii, samples_per_radius)]


def write_profile_csv(rows: List[ProfileRow], path: str) -> str:
    """Profile CSV: radius,count,median_ratio,q25,q75."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["radius", "count", "median_ratio", "q25", "q75"])
        for row in rows:
            writer.writerow([
                format(row.radius, ".17g"), row.count,
                format(row.median_ratio, ".17g"), format(row.q25, ".17g"), format(row.q75, ".17g"),
            ])
    return path
