"""
Point Process - marked vertex layers inside finite windows

Poisson clouds and Bernoulli site-percolated lattices, generated on the padded window
and measured on the inner box. Everything is a pure function of (parameters, seed).
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from chemdist.core.errors import ParameterError, ResourceError, UsageError
from chemdist.core.seeding import mix_seed, philox_generator, vertex_keys

logger = logging.getLogger(__name__)

MAX_POINTS = 10 ** 8
_TWO_M53 = 2.0 ** -53

# Stream tags for mix_seed
STREAM_POINTS = 1
STREAM_LATTICE = 2
STREAM_RING = 3


@dataclass(frozen=True)
class Box:
    """Half-open cube center + [-side/2, side/2)^d."""

    center: Tuple[float, ...]
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ParameterError(f"box side must be positive, got {self.side}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    @property
    def volume(self) -> float:
        return float(self.side) ** self.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of the rows of `points` lying in the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lower) & (pts < self.upper), axis=1)

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lower >= self.lower) and np.all(other.upper <= self.upper))

    def shifted(self, offset: Sequence[float]) -> "Box":
        return Box(tuple(np.asarray(self.center) + np.asarray(offset, dtype=float)), self.side)


@dataclass(frozen=True)
class Window:
    """Measurement box Λ_side(center) plus a generation margin `pad` on every side."""

    dim: int
    side: float
    center: Optional[Tuple[float, ...]] = None
    pad: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")
        if self.dim > 3:
            logger.warning("dim=%d is outside the tested range 1..3", self.dim)
        if not self.side > 0:
            raise ParameterError(f"window side must be positive, got {self.side}")
        if not self.pad >= 0:
            raise ParameterError(f"pad must be nonnegative, got {self.pad}")
        center = self.center if self.center is not None else (0.0,) * self.dim
        if len(center) != self.dim:
            raise ParameterError(f"center has {len(center)} coordinates, expected {self.dim}")
        object.__setattr__(self, "center", tuple(float(c) for c in center))

    @property
    def box(self) -> Box:
        return Box(self.center, self.side)

    @property
    def padded_box(self) -> Box:
        return Box(self.center, self.side + 2.0 * self.pad)

    def with_pad(self, pad: float) -> "Window":
        return Window(self.dim, self.side, self.center, pad)


@dataclass(frozen=True, eq=False)
class MarkedPointCloud:
    """
    Vertex locations with uniform marks in (0, 1).

    Arrays are read-only after construction. `keys` are stable 64-bit vertex keys used to
    address pair randomness, so a permuted cloud regenerates the same edges.
    """

    positions: np.ndarray
    marks: np.ndarray
    window: Window
    seed: int
    keys: np.ndarray
    orientations: Optional[np.ndarray] = None
    lattice: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        positions = np.ascontiguousarray(self.positions, dtype=float).reshape(-1, self.window.dim)
        marks = np.ascontiguousarray(self.marks, dtype=float)
        keys = np.ascontiguousarray(self.keys, dtype=np.uint64)
        if len(marks) != len(positions) or len(keys) != len(positions):
            raise UsageError("positions, marks and keys must have equal length")
        arrays = [positions, marks, keys]
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "keys", keys)
        if self.orientations is not None:
            orientations = np.ascontiguousarray(self.orientations, dtype=float)
            if len(orientations) != len(positions):
                raise UsageError("orientations must have one entry per point")
            object.__setattr__(self, "orientations", orientations)
            arrays.append(orientations)
        for arr in arrays:
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.marks)

    @property
    def dim(self) -> int:
        return self.window.dim

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.positions)

    def inside(self, box: Box) -> np.ndarray:
        """Indices of the points lying in `box`."""
        if len(self) == 0:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(box.contains(self.positions))

    def subset(self, mask: np.ndarray) -> "MarkedPointCloud":
        """Cloud restricted to the selected points; keys travel with their points."""
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return self._take(idx)

    def permuted(self, order: np.ndarray) -> "MarkedPointCloud":
        return self._take(np.asarray(order))

    def _take(self, idx: np.ndarray) -> "MarkedPointCloud":
        return MarkedPointCloud(
            positions=self.positions[idx],
            marks=self.marks[idx],
            window=self.window,
            seed=self.seed,
            keys=self.keys[idx],
            orientations=None if self.orientations is None else self.orientations[idx],
            lattice=self.lattice,
            meta=dict(self.meta),
        )


def _uniform_marks(rng: np.random.Generator, count: int) -> np.ndarray:
    """Marks on the grid (k + 1/2) 2^-53, strictly inside (0, 1)."""
    return (rng.integers(0, 2 ** 53, size=count).astype(np.float64) + 0.5) * _TWO_M53


def _drop_duplicates(positions: np.ndarray) -> np.ndarray:
    """Indices of first occurrences of each location."""
    if len(positions) < 2:
        return np.arange(len(positions))
    _, first = np.unique(positions, axis=0, return_index=True)
    if len(first) < len(positions):
        logger.warning("Dropped %d duplicate locations from cloud", len(positions) - len(first))
    return np.sort(first)


def sample_poisson(window: Window, intensity: float, seed: int, oriented: bool = False) -> MarkedPointCloud:
    """
    Homogeneous marked Poisson process on the padded window.

    Args:
        window: Window (points cover the padded box)
        intensity: Expected points per unit volume
        seed: Replicate seed
        oriented: Also draw orientations uniform on [0, pi) (ellipse model)

    Returns:
        MarkedPointCloud
    """
    if not intensity > 0 or not math.isfinite(intensity):
        raise ParameterError(f"intensity must be positive, got {intensity}")
    box = window.padded_box
    expected = intensity * box.volume
    if expected > MAX_POINTS:
        raise ResourceError(f"expected point count {expected:.3g} exceeds {MAX_POINTS:.0e}")

    rng = philox_generator(mix_seed(seed, STREAM_POINTS))
    count = int(rng.poisson(expected))
    lower, upper = box.lower, box.upper
    positions = lower + rng.random((count, window.dim)) * box.side
    positions = np.minimum(positions, np.nextafter(upper, lower))
    marks = _uniform_marks(rng, count)
    orientations = rng.random(count) * math.pi if oriented else None

    keep = _drop_duplicates(positions)
    if len(keep) < count:
        positions, marks = positions[keep], marks[keep]
        orientations = None if orientations is None else orientations[keep]

    logger.debug("Poisson cloud: %d points (expected %.1f)", len(marks), expected)
    return MarkedPointCloud(
        positions=positions,
        marks=marks,
        window=window,
        seed=seed,
        keys=vertex_keys(seed, len(marks)),
        orientations=orientations,
        meta={"intensity": float(intensity)},
    )


def extend_poisson(cloud: MarkedPointCloud, pad: float) -> MarkedPointCloud:
    """
    Grow the margin of a Poisson cloud to `pad`, keeping every existing point.

    The ring between the old and the new padded box is filled from its own stream, so the
    result is again a Poisson cloud on the larger window and the inner points do not move.
    """
    if cloud.lattice or "intensity" not in cloud.meta:
        raise UsageError("only Poisson clouds can be extended")
    window = cloud.window
    if pad <= window.pad:
        return cloud
    intensity = cloud.meta["intensity"]
    grown = window.with_pad(pad)
    outer, inner = grown.padded_box, window.padded_box
    expected = intensity * outer.volume
    if expected > MAX_POINTS:
        raise ResourceError(f"expected point count {expected:.3g} exceeds {MAX_POINTS:.0e}")

    ring_seed = mix_seed(cloud.seed, STREAM_RING)
    rng = philox_generator(ring_seed)
    count = int(rng.poisson(expected))
    positions = outer.lower + rng.random((count, window.dim)) * outer.side
    positions = np.minimum(positions, np.nextafter(outer.upper, outer.lower))
    marks = _uniform_marks(rng, count)
    orientations = rng.random(count) * math.pi if cloud.orientations is not None else None
    ring = ~inner.contains(positions) if count else np.zeros(0, dtype=bool)

    logger.debug("Extended cloud pad %.3g -> %.3g: %d ring points", window.pad, pad, int(ring.sum()))
    return MarkedPointCloud(
        positions=np.concatenate([cloud.positions, positions[ring]]),
        marks=np.concatenate([cloud.marks, marks[ring]]),
        window=grown,
        seed=cloud.seed,
        keys=np.concatenate([cloud.keys, vertex_keys(ring_seed, int(ring.sum()))]),
        orientations=None if orientations is None else np.concatenate([cloud.orientations, orientations[ring]]),
        meta=dict(cloud.meta),
    )


def lattice_sites(box: Box) -> np.ndarray:
    """All points of Z^d inside a half-open box, in lexicographic order."""
    axes = [np.arange(math.ceil(lo), math.ceil(hi), dtype=float) for lo, hi in zip(box.lower, box.upper)]
    total = math.prod(len(a) for a in axes)
    if total > MAX_POINTS:
        raise ResourceError(f"lattice has {total} sites, more than {MAX_POINTS:.0e}")
    if total == 0:
        return np.empty((0, box.dim))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def sample_site_lattice(window: Window, retention: float, seed: int, oriented: bool = False) -> MarkedPointCloud:
    """Bernoulli(retention) site percolation on Z^d restricted to the padded window."""
    if not (0 < retention <= 1):
        raise ParameterError(f"retention must lie in (0, 1], got {retention}")
    sites = lattice_sites(window.padded_box)
    rng = philox_generator(mix_seed(seed, STREAM_LATTICE))
    kept = sites[rng.random(len(sites)) < retention]
    marks = _uniform_marks(rng, len(kept))
    orientations = rng.random(len(kept)) * math.pi if oriented else None
    return MarkedPointCloud(
        positions=kept,
        marks=marks,
        window=window,
        seed=seed,
        keys=vertex_keys(seed, len(kept)),
        orientations=orientations,
        lattice=True,
        meta={"retention": float(retention)},
    )


def write_vertices_csv(cloud: MarkedPointCloud, path: str) -> str:
    """Vertex CSV: id,x1..xd,mark[,orientation] with 17 significant digits."""
    header = ["id"] + [f"x{i + 1}" for i in range(cloud.dim)] + ["mark"]
    if cloud.orientations is not None:
        header.append("orientation")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(cloud)):
            row = [i] + [format(v, ".17g") for v in cloud.positions[i]] + [format(cloud.marks[i], ".17g")]
            if cloud.orientations is not None:
                row.append(format(cloud.orientations[i], ".17g"))
            writer.writerow(row)
    return path


def read_vertices_csv(path: str, window: Window, seed: int = 0, lattice: bool = False) -> MarkedPointCloud:
    """Read a vertex CSV written by write_vertices_csv; rows are ordered by id."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = sorted((r for r in reader if r), key=lambda r: int(r[0]))
    dim = sum(1 for h in header if h.startswith("x"))
    if dim != window.dim:
        raise UsageError(f"{path} has {dim} coordinates, window expects {window.dim}")
    has_orientation = "orientation" in header
    width = dim + 1 + int(has_orientation)
    data = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(rows), width)
    orientations = data[:, dim + 1] if has_orientation else None
    return MarkedPointCloud(
        positions=data[:, :dim],
        marks=data[:, dim],
        window=window,
        seed=seed,
        keys=vertex_keys(seed, len(rows)),
        orientations=orientations,
        lattice=lattice,
    )
