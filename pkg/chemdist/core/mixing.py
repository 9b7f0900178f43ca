"""
Mixing - covariance of local-event indicators in two distant boxes

Both boxes Λ_m(o) and Λ_m(m x) are evaluated on the same realization of one joint window.
Local events read only vertices and edges internal to their box; a probe re-evaluates them
on the box-restricted graph and rejects events that look further.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.sparse import csgraph

from chemdist.core.config import ModelSpec
from chemdist.core.errors import ContractError, ParameterError, UsageError
from chemdist.core.graph import SpatialGraph
from chemdist.core.models import interference_reach, realize, resolve_pad
from chemdist.core.point_process import Box, Window
from chemdist.core.runner import map_replicates, replicate_seed
from chemdist.core.stats import ExponentFit, fit_exponent, unreliable_fit

logger = logging.getLogger(__name__)

Evaluator = Callable[[SpatialGraph, Box], bool]

PROBE_REPLICATES = 8
SIGNIFICANCE = 3.0


@dataclass(frozen=True)
class LocalEvent:
    """A predicate of the graph inside a box."""

    name: str
    evaluator: Evaluator
    params: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, graph: SpatialGraph, box: Box) -> bool:
        return bool(self.evaluator(graph, box, **self.params))

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


def _stage0_bad(graph: SpatialGraph, box: Box, fraction: float = 100.0) -> bool:
    """Some internal edge is longer than side/fraction."""
    if graph.edge_count == 0:
        return False
    return bool(np.any(graph.edge_lengths[graph.internal_edges(box)] > box.side / fraction))


def _has_long_edge(graph: SpatialGraph, box: Box, n: float) -> bool:
    if graph.edge_count == 0:
        return False
    return bool(np.any(graph.edge_lengths[graph.internal_edges(box)] > n))


def _component_of_size(graph: SpatialGraph, box: Box, k: int) -> bool:
    """The box-internal graph has a connected component with at least k vertices."""
    local = graph.restrict(box)
    if local.vertex_count < k:
        return False
    _, labels = csgraph.connected_components(local.adjacency, directed=False)
    return bool(np.bincount(labels).max() >= k)


_REGISTRY: Dict[str, Callable[..., LocalEvent]] = {}


def register_event(name: str, evaluator: Evaluator) -> None:
    """
    Register a local event under `name`. The evaluator is called as
    evaluator(graph, box, **params) and must read only what lies inside the box.
    Module-level functions keep the event usable from worker processes.
    """
    _REGISTRY[name] = partial(LocalEvent, name, evaluator)


def get_event(name: str, **params: Any) -> LocalEvent:
    if name not in _REGISTRY:
        raise ParameterError(f"unknown local event {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name](params)


def registered_events() -> List[str]:
    return sorted(_REGISTRY)


register_event("stage0-bad", _stage0_bad)
register_event("has-long-edge", _has_long_edge)
register_event("component-of-size", _component_of_size)


def probe_locality(event: LocalEvent, graph: SpatialGraph, box: Box, margin: float = 0.0) -> bool:
    """
    Evaluate the event on the full graph and on the graph restricted to the box enlarged by
    `margin`; a mismatch raises ContractError.
    """
    full = event(graph, box)
    view = graph.restrict(Box(box.center, box.side + 2.0 * margin)) if margin > 0 else graph.restrict(box)
    local = event(view, box)
    if full != local:
        raise ContractError(f"event {event.label} depends on the graph outside its box")
    return full


@dataclass(frozen=True)
class MixingEstimate:
    event: str
    m: float
    x: Tuple[float, ...]
    covariance: float
    stderr: float
    replicates: int
    p_first: float
    p_second: float

    @property
    def x_norm(self) -> float:
        return float(np.linalg.norm(self.x))

    @property
    def significant(self) -> bool:
        return abs(self.covariance) > SIGNIFICANCE * self.stderr


def as_displacement(x, dim: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 1 and dim > 1:
        # scalar displacement along the first axis
        x = np.concatenate([x, np.zeros(dim - 1)])
    if x.size != dim:
        raise ParameterError(f"displacement has {x.size} coordinates, expected {dim}")
    if not np.linalg.norm(x) > 2.0:
        raise ParameterError(f"|x| must exceed 2, got {np.linalg.norm(x):g}")
    return x


def mixing_window(spec: ModelSpec, m: float, x: np.ndarray) -> Window:
    """Smallest cube centered between the two boxes that holds both of them."""
    center = tuple(m * x / 2.0)
    side = m * float(np.max(np.abs(x))) + m
    return Window(dim=spec.dim, side=side, center=center, pad=resolve_pad(spec, side, internal_only=True))


def mixing_boxes(window: Window, m: float, x: np.ndarray) -> Tuple[Box, Box]:
    first = Box((0.0,) * window.dim, m)
    second = Box(tuple(m * x), m)
    for box in (first, second):
        if not window.box.contains_box(box):
            raise UsageError("event boxes exit the joint window")
    return first, second


def _locality_margin(spec: ModelSpec, graph: SpatialGraph, box: Box) -> float:
    """Interference events are local relative to the box plus its interference balls."""
    if spec.model != "interference":
        return 0.0
    return interference_reach(graph.cloud, spec.interference_params(), box)


def sample_indicators(
    spec: ModelSpec, event: LocalEvent, m: float, x: np.ndarray, window: Window, seed: int, index: int
) -> Tuple[bool, bool]:
    """Both indicators on one realization; the first replicates also run the locality probe."""
    graph = realize(spec, window, replicate_seed(seed, index))
    first, second = mixing_boxes(window, m, x)
    if index < PROBE_REPLICATES:
        a = probe_locality(event, graph, first, _locality_margin(spec, graph, first))
        b = probe_locality(event, graph, second, _locality_margin(spec, graph, second))
        return a, b
    return event(graph, first), event(graph, second)


def covariance_estimate(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """
    Plug-in covariance of two indicator samples and its standard error.

    The standard error is the sample deviation of (A - mean A)(B - mean B) over sqrt(n),
    floored at 1/n so that it stays positive for degenerate samples.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    if n < 2:
        raise ParameterError("need at least 2 replicates for a covariance")
    products = (a - a.mean()) * (b - b.mean())
    cov = float(products.mean())
    stderr = float(products.std(ddof=1) / math.sqrt(n))
    return cov, max(stderr, 1.0 / n)


def estimate_mixing(
    spec: ModelSpec, event: LocalEvent, m: float, x: Sequence[float], replicates: int, seed: int
) -> MixingEstimate:
    """
    Covariance of 1_E(Λ_m(o)) and 1_E(Λ_m(m x)) over independent realizations.

    Args:
        spec: Model
        event: Registered local event
        m: Box side
        x: Displacement with |x| > 2 (a scalar means a shift along the first axis)
        replicates: Number of replicates
        seed: Master seed
    """
    if not m > 0:
        raise ParameterError(f"m must be positive, got {m}")
    if replicates < 2:
        raise ParameterError(f"replicates must be >= 2, got {replicates}")
    x = as_displacement(x, spec.dim)
    window = mixing_window(spec, m, x)
    mixing_boxes(window, m, x)
    task = partial(sample_indicators, spec, event, m, x, window, seed)
    pairs = np.array(list(map_replicates(task, range(replicates))), dtype=float).reshape(-1, 2)
    cov, stderr = covariance_estimate(pairs[:, 0], pairs[:, 1])
    logger.info("Mixing %s m=%g |x|=%.3g: cov=%.3g +- %.3g", event.label, m, np.linalg.norm(x), cov, stderr)
    return MixingEstimate(
        event=event.label,
        m=float(m),
        x=tuple(float(v) for v in x),
        covariance=cov,
        stderr=stderr,
        replicates=replicates,
        p_first=float(pairs[:, 0].mean()),
        p_second=float(pairs[:, 1].mean()),
    )


def fit_mixing_exponent(estimates: Sequence[MixingEstimate]) -> ExponentFit:
    """
    Slope of log |covariance| against log m over the significant scales (|cov| > 3 stderr).
    Fewer than 3 significant scales give a fit flagged unreliable.
    """
    kept = [(e.m, abs(e.covariance)) for e in estimates if e.significant]
    dropped = [(e.m, abs(e.covariance)) for e in estimates if not e.significant]
    if len(kept) < 3:
        return unreliable_fit(kept, dropped)
    fit = fit_exponent(kept)
    return ExponentFit(
        slope=fit.slope,
        intercept=fit.intercept,
        stderr=fit.stderr,
        r2=fit.r2,
        points=fit.points,
        excluded=dropped + fit.excluded,
    )
