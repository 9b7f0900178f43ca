"""
Renorm - factorial scale ladder, recursive good/bad boxes and the path decomposition

Scales K_n = K (n!)^2. A stage-0 box of side K is good iff no internal edge is longer than
K/100. A stage-n box B_n (side K_n) is good iff each of its 3^d shifts B_n^j by j K_{n-1}/2,
j in {-1, 0, 1}^d,
    (a) has no internal edge longer than K_{n-1}/100, and
    (b) contains at most 3^d bad stage-(n-1) boxes among the n^(2d) boxes tiling it from
        its lower corner.
"""
import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from chemdist.core.config import ModelSpec
from chemdist.core.errors import ParameterError, ResourceError, UsageError
from chemdist.core.graph import SpatialGraph
from chemdist.core.long_edges import LongEdgeTail
from chemdist.core.models import realize, resolve_pad
from chemdist.core.point_process import Box, Window
from chemdist.core.runner import map_replicates, replicate_seed
from chemdist.core.stats import ProportionEstimate, proportion

logger = logging.getLogger(__name__)

MAX_SCALE = 2 ** 62
LENGTH_FRACTION = 100


def scale(K: int, n: int) -> int:
    """K_n = K (n!)^2 as an exact integer."""
    if isinstance(K, bool) or int(K) != K or K <= 0 or K % 2:
        raise ParameterError(f"K must be a positive even integer, got {K}")
    if n < 0:
        raise ParameterError(f"stage must be nonnegative, got {n}")
    value = int(K) * math.factorial(n) ** 2
    if value > MAX_SCALE:
        raise ResourceError(f"K_{n} = {K}({n}!)^2 exceeds 2^62")
    return value


@dataclass(frozen=True)
class ScaleLadder:
    K: int
    max_stage: int = 3

    def __post_init__(self):
        if self.max_stage < 0:
            raise ParameterError(f"max_stage must be nonnegative, got {self.max_stage}")
        scale(self.K, self.max_stage)

    @property
    def sizes(self) -> List[int]:
        return [scale(self.K, n) for n in range(self.max_stage + 1)]

    def size(self, n: int) -> int:
        if n > self.max_stage:
            raise ParameterError(f"stage {n} beyond max_stage {self.max_stage}")
        return scale(self.K, n)

    def threshold(self, n: int) -> float:
        """Edge length a stage-n box tolerates: K_{n-1}/100, or K_0/100 at stage 0."""
        return self.size(max(n - 1, 0)) / LENGTH_FRACTION

    def box(self, center: Sequence[float], n: int) -> Box:
        return Box(tuple(center), self.size(n))

    def shifts(self, center: Sequence[float], n: int) -> List[Tuple[Tuple[int, ...], Box]]:
        """The 3^d shifted boxes B_n^j(center), j in lexicographic order."""
        base = self.box(center, n)
        if n == 0:
            return [((0,) * base.dim, base)]
        step = self.size(n - 1) / 2.0
        return [
            (j, base.shifted(np.asarray(j, dtype=float) * step))
            for j in itertools.product((-1, 0, 1), repeat=base.dim)
        ]

    def sub_centers(self, box: Box, n: int) -> np.ndarray:
        """Centers of the n^(2d) stage-(n-1) boxes tiling `box` from its lower corner."""
        sub = self.size(n - 1)
        per_axis = n * n
        ticks = box.lower[:, None] + sub * (np.arange(per_axis)[None, :] + 0.5)
        grids = np.meshgrid(*ticks, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def reach(self, n: int) -> float:
        """Half-side of the cube covering every box read when classifying a stage-n box."""
        return sum(self.size(k) for k in range(n + 1)) / 2.0

    def footprint(self, n: int) -> float:
        """Side of the union of the shift family of a stage-n box."""
        return self.size(n) + (self.size(n - 1) if n > 0 else 0)


@dataclass(frozen=True)
class LongEdgeFailure:
    edge: Tuple[int, int]
    length: float
    threshold: float
    shift: Tuple[int, ...]

    kind = "long_edge"

    def detail(self) -> str:
        return f"edge={self.edge[0]}-{self.edge[1]} length={self.length:.17g} threshold={self.threshold:g} shift={_fmt_shift(self.shift)}"


@dataclass(frozen=True)
class TooManyBadFailure:
    shift: Tuple[int, ...]
    bad_count: int
    limit: int

    kind = "too_many_bad"

    def detail(self) -> str:
        return f"shift={_fmt_shift(self.shift)} bad={self.bad_count} limit={self.limit}"


Failure = Union[LongEdgeFailure, TooManyBadFailure]


def _fmt_shift(shift: Tuple[int, ...]) -> str:
    return "(" + ",".join(str(s) for s in shift) + ")"


@dataclass(frozen=True)
class BoxVerdict:
    stage: int
    center: Tuple[float, ...]
    good: bool
    failure: Optional[Failure] = None

    def __bool__(self) -> bool:
        return self.good

    def row(self) -> dict:
        return {
            "stage": self.stage,
            "center": ";".join(format(c, ".17g") for c in self.center),
            "good": self.good,
            "failure_kind": self.failure.kind if self.failure else "",
            "detail": self.failure.detail() if self.failure else "",
        }


class BoxClassifier:
    """
    Memoized good/bad classification on one graph.

    Only edges longer than K_0/100 can make a box bad, so they are extracted once; a box
    whose whole recursive footprint holds none of them is good without recursion.
    """

    def __init__(self, graph: SpatialGraph, ladder: ScaleLadder):
        self.graph = graph
        self.ladder = ladder
        self.memo: Dict[Tuple[int, Tuple[float, ...]], BoxVerdict] = {}
        min_threshold = ladder.threshold(0)
        lengths = graph.edge_lengths
        long = np.flatnonzero(lengths > min_threshold) if graph.edge_count else np.empty(0, dtype=np.int64)
        pos = graph.cloud.positions
        self._edges = graph.edges[long]
        self._lengths = lengths[long] if graph.edge_count else np.empty(0)
        self._pos_a = pos[self._edges[:, 0]] if len(long) else np.empty((0, graph.cloud.dim))
        self._pos_b = pos[self._edges[:, 1]] if len(long) else np.empty((0, graph.cloud.dim))
        logger.debug("Classifier: %d of %d edges exceed K_0/100", len(long), graph.edge_count)

    def classify(self, center: Sequence[float], stage: int) -> BoxVerdict:
        """Verdict of B_stage(center); the shift family must lie in the measurement window."""
        center = tuple(float(c) for c in center)
        if len(center) != self.graph.cloud.dim:
            raise UsageError(f"center has {len(center)} coordinates, graph has dim {self.graph.cloud.dim}")
        family = Box(center, self.ladder.footprint(stage))
        if not self.graph.cloud.window.box.contains_box(family):
            raise UsageError(
                f"stage-{stage} shift family (side {family.side:g}) exits the measurement window "
                f"(side {self.graph.cloud.window.side:g})"
            )
        return self._classify(center, stage)

    def _long_internal(self, box: Box, threshold: float) -> Optional[int]:
        """Index (into the long-edge arrays) of the longest internal edge above threshold."""
        if len(self._lengths) == 0:
            return None
        hit = box.contains(self._pos_a) & box.contains(self._pos_b) & (self._lengths > threshold)
        if not hit.any():
            return None
        idx = np.flatnonzero(hit)
        return int(idx[np.argmax(self._lengths[idx])])

    def _quiet(self, center: Tuple[float, ...], stage: int) -> bool:
        region = Box(center, 2.0 * self.ladder.reach(stage))
        return self._long_internal(region, self.ladder.threshold(0)) is None

    def _classify(self, center: Tuple[float, ...], stage: int) -> BoxVerdict:
        key = (stage, tuple(round(c, 9) for c in center))
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        verdict = self._evaluate(center, stage)
        self.memo[key] = verdict
        return verdict

    def _evaluate(self, center: Tuple[float, ...], stage: int) -> BoxVerdict:
        if self._quiet(center, stage):
            return BoxVerdict(stage, center, True)
        threshold = self.ladder.threshold(stage)
        limit = 3 ** len(center)
        for shift, box in self.ladder.shifts(center, stage):
            k = self._long_internal(box, threshold)
            if k is not None:
                edge = (int(self._edges[k, 0]), int(self._edges[k, 1]))
                failure = LongEdgeFailure(edge, float(self._lengths[k]), threshold, shift)
                return BoxVerdict(stage, center, False, failure)
            if stage == 0:
                continue
            bad = 0
            for sub in self.ladder.sub_centers(box, stage):
                if not self._classify(tuple(float(c) for c in sub), stage - 1).good:
                    bad += 1
                    if bad > limit:
                        return BoxVerdict(stage, center, False, TooManyBadFailure(shift, bad, limit))
        return BoxVerdict(stage, center, True)


def classify_box(graph: SpatialGraph, center: Sequence[float], stage: int, ladder: ScaleLadder) -> BoxVerdict:
    return BoxClassifier(graph, ladder).classify(center, stage)


def write_verdicts_csv(verdicts: Sequence[BoxVerdict], path: str) -> str:
    """Verdict CSV: stage,center,good,failure_kind,detail."""
    fields = ["stage", "center", "good", "failure_kind", "detail"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for v in verdicts:
            row = v.row()
            row["good"] = int(row["good"])
            writer.writerow(row)
    return path


def psi_window(spec: ModelSpec, ladder: ScaleLadder, stage: int, side: Optional[float] = None) -> Window:
    """Window whose measurement box covers the recursive footprint of B_stage(o)."""
    needed = 2.0 * ladder.reach(stage)
    side = needed if side is None else side
    if side < ladder.footprint(stage):
        raise UsageError(f"window side {side:g} below K_n + K_(n-1) = {ladder.footprint(stage):g}")
    return Window(dim=spec.dim, side=side, pad=resolve_pad(spec, side, internal_only=True))


def sample_psi(spec: ModelSpec, ladder: ScaleLadder, stage: int, window: Window, seed: int, index: int) -> bool:
    """One replicate: is B_stage(o) bad?"""
    graph = realize(spec, window, replicate_seed(seed, index))
    return not BoxClassifier(graph, ladder).classify(window.center, stage).good


def estimate_psi(
    spec: ModelSpec, ladder: ScaleLadder, stage: int, replicates: int, seed: int, side: Optional[float] = None
) -> ProportionEstimate:
    """
    Monte Carlo estimate of psi_K(stage) = P(B_stage(o) is bad).

    Args:
        spec: Model
        ladder: Scale ladder
        stage: Stage n
        replicates: Number of replicates (>= 100 recommended)
        seed: Master seed
        side: Measurement window side (defaults to the full recursive footprint)
    """
    if replicates < 1:
        raise ParameterError(f"replicates must be positive, got {replicates}")
    if replicates < 100:
        logger.warning("Only %d replicates for psi_%d", replicates, stage)
    window = psi_window(spec, ladder, stage, side)
    task = partial(sample_psi, spec, ladder, stage, window, seed)
    bad = sum(map_replicates(task, range(replicates)))
    return proportion(int(bad), replicates)


def _rate(xi: float, mu: float, d: int) -> Tuple[float, float]:
    """|xi v (d + mu)| and |xi ^ (d + mu)|, with xi = -inf read as xi = d + mu."""
    if xi == -math.inf:
        xi = d + mu
    return abs(max(xi, d + mu)), abs(min(xi, d + mu))


def psi_log_bound(n: int, xi: float, mu: float, d: int, c: float) -> float:
    """log of ((n+1)!)^(-2|xi v (d+mu)| + c/n)."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not xi < 0:
        raise ParameterError(f"xi must be negative, got {xi}")
    if not mu < -d:
        raise ParameterError(f"mu must be below -d = {-d}, got {mu}")
    alpha, beta = _rate(xi, mu, d)
    if not c > 4.0 * (d + beta):
        raise ParameterError(f"c must exceed 4(d + |xi ^ (d+mu)|) = {4.0 * (d + beta):g}, got {c}")
    return (-2.0 * alpha + c / n) * math.lgamma(n + 2)


def psi_bound(n: int, xi: float, mu: float, d: int, c: float) -> float:
    """((n+1)!)^(-2|xi v (d+mu)| + c/n), evaluated in log space; inf on overflow."""
    log_value = psi_log_bound(n, xi, mu, d, c)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def psi_recursion_bound(
    psi_prev: float, n: int, d: int, long_edge_prob: float, C_mix: float, xi: float, K_prev: float
) -> float:
    """One step psi(n) <= 3^d P(L_n) + 3^d n^(4d) (psi(n-1)^2 + C_mix K_{n-1}^(-|xi|))."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    mixing = C_mix * K_prev ** (-abs(xi)) if math.isfinite(xi) else 0.0
    return 3 ** d * long_edge_prob + 3 ** d * n ** (4 * d) * (psi_prev ** 2 + mixing)


def long_edge_stage_bound(n: int, K: int, tail: LongEdgeTail, d: int) -> float:
    """P(L_n) <= 100^|mu| C_L K_n^d K_{n-1}^mu."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not tail.mu < -d:
        raise ParameterError(f"mu must be below -d = {-d}, got {tail.mu}")
    log_value = (
        abs(tail.mu) * math.log(LENGTH_FRACTION)
        + math.log(tail.C_L)
        + d * math.log(scale(K, n))
        + tail.mu * math.log(scale(K, n - 1))
    )
    return math.exp(log_value) if log_value < 709.0 else math.inf


def default_N(d: int) -> int:
    """N = (2d + 1) 9^d."""
    return (2 * d + 1) * 9 ** d


def renorm_product(n: int, N: int) -> float:
    """Pi(n) = prod_{h=N}^{n} (1 - N/h^2); the empty product is 1."""
    if N < 2:
        raise ParameterError(f"N must be >= 2, got {N}")
    if n < N:
        return 1.0
    h = np.arange(N, n + 1, dtype=float)
    return float(np.exp(np.sum(np.log1p(-N / h ** 2))))


@dataclass(frozen=True)
class TailEnvelope:
    """Partial sums S(n) = sum_{k >= n-1} bound(k) against (n!)^(-2 alpha + c/n)."""

    n_values: List[int]
    log_sums: List[float]
    log_envelope: List[float]
    C: float

    @property
    def log_ratios(self) -> List[float]:
        return [s - e for s, e in zip(self.log_sums, self.log_envelope)]


def psi_tail_envelope(
    n_values: Sequence[int], xi: float, mu: float, d: int, c: float, horizon: int = 400
) -> TailEnvelope:
    """
    Compare tail sums of psi_bound with the factorial envelope; C is the smallest constant
    that makes the envelope dominate on `n_values`.
    """
    n_values = [int(n) for n in n_values]
    if not n_values or min(n_values) < 2:
        raise ParameterError("n_values must be integers >= 2")
    alpha, _ = _rate(xi, mu, d)
    top = max(n_values) + horizon
    log_terms = np.array([psi_log_bound(k, xi, mu, d, c) for k in range(1, top + 1)])
    log_sums, log_env = [], []
    for n in n_values:
        log_sums.append(float(logsumexp(log_terms[n - 2:])))
        log_env.append((-2.0 * alpha + c / n) * math.lgamma(n + 1))
    C = math.exp(max(s - e for s, e in zip(log_sums, log_env)))
    return TailEnvelope(n_values, log_sums, log_env, C)


def stage_for_side(K: int, m: float) -> int:
    """Largest n with K_n <= m."""
    if scale(K, 0) > m:
        raise ParameterError(f"side {m} is below K = {K}")
    n = 0
    while True:
        try:
            if scale(K, n + 1) > m:
                return n
        except ResourceError:
            return n
        n += 1


@dataclass(frozen=True)
class PathDecomposition:
    """
    Alternating good and bad segments of a path: pi_1, sigma_1, pi_2, ..., sigma_T, pi_{T+1},
    padded with empty segments to 9^d bad and 9^d + 1 good slots. `spans` holds the path index
    range [start, stop) of every slot in interleaved order.
    """

    path: Tuple[int, ...]
    good_segments: List[Tuple[int, ...]]
    bad_segments: List[Tuple[int, ...]]
    bad_boxes: List[Box]
    box_order: List[int] = field(default_factory=list)
    spans: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def crossings(self) -> int:
        return len(self.box_order)

    def interleaved(self) -> List[Tuple[int, ...]]:
        out = []
        for s, good in enumerate(self.good_segments):
            out.append(good)
            if s < len(self.bad_segments):
                out.append(self.bad_segments[s])
        return out

    def reconstitute(self) -> Tuple[int, ...]:
        """Concatenate the nonempty segments, dropping the shared junction vertices."""
        out: List[int] = []
        for segment, (start, stop) in zip(self.interleaved(), self.spans):
            if not segment:
                continue
            if start > len(out):
                raise UsageError("segments leave a gap in the path")
            out.extend(segment[len(out) - start:])
        return tuple(out)


def _path_positions(graph: SpatialGraph, path: Sequence[int]) -> np.ndarray:
    path = np.asarray(path, dtype=np.int64)
    for v in (path.min(), path.max()):
        graph.check_vertex(int(v))
    adj = graph.adjacency
    for a, b in zip(path[:-1], path[1:]):
        if a != b and adj[a, b] == 0:
            raise UsageError(f"path is not a walk: {a} and {b} are not adjacent")
    return graph.cloud.positions[path]


def decompose_path(graph: SpatialGraph, path: Sequence[int], bad_boxes: Sequence[Box]) -> PathDecomposition:
    """
    Split a walk at the bad region Q (union of `bad_boxes`).

    i_s is the first index after k_{s-1} in Q, j_s the smallest-index box containing v_{i_s},
    k_s the last index of the walk in Q_{j_s}; sigma_s = (v_{i_s - 1}, ..., v_{k_s + 1}) clipped
    to the walk, and the good segments are the stretches in between.
    """
    if not len(path):
        raise UsageError("path must be nonempty")
    dim = graph.cloud.dim
    slots = 9 ** dim
    if len(bad_boxes) > slots:
        raise UsageError(f"{len(bad_boxes)} bad boxes exceed the 9^d = {slots} allowed")
    path = tuple(int(v) for v in path)
    pos = _path_positions(graph, path)
    last = len(path) - 1
    if bad_boxes:
        member = np.stack([box.contains(pos) for box in bad_boxes], axis=0)
    else:
        member = np.zeros((0, len(path)), dtype=bool)
    in_q = member.any(axis=0)

    goods, bads, order, spans = [], [], [], []
    cursor = 0
    k = -1
    while True:
        after = np.flatnonzero(in_q[k + 1:])
        if len(after) == 0:
            break
        i = k + 1 + int(after[0])
        j = int(np.flatnonzero(member[:, i])[0])
        k = int(np.flatnonzero(member[j])[-1])
        good_stop = i
        goods.append(path[cursor:good_stop])
        spans.append((cursor, good_stop))
        start, stop = max(i - 1, 0), min(k + 2, last + 1)
        bads.append(path[start:stop])
        spans.append((start, stop))
        order.append(j)
        cursor = k + 1
    goods.append(path[cursor:])
    spans.append((cursor, last + 1))

    # pad to the fixed slot counts
    while len(bads) < slots:
        bads.append(())
        goods.append(())
        spans.extend([(last + 1, last + 1), (last + 1, last + 1)])
    return PathDecomposition(path, goods, bads, list(bad_boxes), order, spans)


def greedy_waypoints(points: np.ndarray, K_prev: float) -> List[int]:
    """
    Greedy waypoints along a segment given by its vertex positions.

    From the current waypoint w, the endpoint becomes the last waypoint once every remaining
    vertex lies within K_prev/2 of w; otherwise the next waypoint is the first vertex at
    distance >= K_prev/2. Consecutive waypoints are therefore at least K_prev/2 (so more than
    K_prev/16) apart, and every vertex strictly between two waypoints is within K_prev/2 of the
    earlier one.

    The final pair carries no spacing guarantee: the endpoint is appended as soon as the
    remainder fits in the current ball, however close it lies. A segment ending one step past
    a waypoint yields a final gap of one step.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise UsageError("segment must be nonempty")
    if not K_prev > 0:
        raise ParameterError(f"K_prev must be positive, got {K_prev}")
    radius = K_prev / 2.0
    last = len(points) - 1
    waypoints = [0]
    w = 0
    while w < last:
        dist = np.linalg.norm(points[w + 1:] - points[w], axis=1)
        outside = np.flatnonzero(dist >= radius)
        if len(outside) == 0:
            waypoints.append(last)
            break
        w = w + 1 + int(outside[0])
        waypoints.append(w)
    return waypoints
