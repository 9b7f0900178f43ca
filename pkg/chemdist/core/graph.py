"""
Graph - immutable spatial graph over a marked point cloud
"""
import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse

from chemdist.core.errors import UsageError
from chemdist.core.point_process import Box, MarkedPointCloud

logger = logging.getLogger(__name__)


def canonical_edges(edges: np.ndarray) -> np.ndarray:
    """Edges as a sorted, duplicate-free (k, 2) array with id_a < id_b; self-loops dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return pairs.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    """
    Undirected simple graph on a cloud. `edges` holds each edge once with id_a < id_b;
    the CSR adjacency has sorted neighbor lists.
    """

    cloud: MarkedPointCloud
    edges: np.ndarray

    def __post_init__(self):
        edges = canonical_edges(self.edges)
        if len(edges) and (edges.min() < 0 or edges.max() >= len(self.cloud)):
            raise UsageError("edge endpoint outside the cloud")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def vertex_count(self) -> int:
        return len(self.cloud)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        n = self.vertex_count
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        adj = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        return adj

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        if self.edge_count == 0:
            return np.empty(0)
        pos = self.cloud.positions
        return np.linalg.norm(pos[self.edges[:, 0]] - pos[self.edges[:, 1]], axis=1)

    def neighbors(self, vertex: int) -> np.ndarray:
        self.check_vertex(vertex)
        adj = self.adjacency
        return adj.indices[adj.indptr[vertex]:adj.indptr[vertex + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def mean_degree(self, box: Optional[Box] = None) -> float:
        """Mean degree over the vertices in `box` (all vertices if omitted)."""
        deg = self.degrees()
        if box is not None:
            deg = deg[self.cloud.inside(box)]
        return float(deg.mean()) if len(deg) else 0.0

    def check_vertex(self, vertex: int) -> None:
        if not (0 <= int(vertex) < self.vertex_count):
            raise UsageError(f"vertex id {vertex} outside 0..{self.vertex_count - 1}")

    def internal_edges(self, box: Box) -> np.ndarray:
        """Mask over `edges` of edges with both endpoint locations in `box`."""
        if self.edge_count == 0:
            return np.zeros(0, dtype=bool)
        inside = box.contains(self.cloud.positions) if self.vertex_count else np.zeros(0, dtype=bool)
        return inside[self.edges[:, 0]] & inside[self.edges[:, 1]]

    def restrict(self, box: Box) -> "SpatialGraph":
        """Subgraph induced by the vertices in `box`, with vertices renumbered."""
        idx = self.cloud.inside(box)
        remap = np.full(self.vertex_count, -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        sub_edges = remap[self.edges[self.internal_edges(box)]] if self.edge_count else np.empty((0, 2))
        return SpatialGraph(self.cloud.subset(idx), sub_edges)

    def with_edges(self, edges: np.ndarray) -> "SpatialGraph":
        """Same cloud, different edge set."""
        return SpatialGraph(self.cloud, edges)

    def add_edges(self, extra: np.ndarray) -> "SpatialGraph":
        return SpatialGraph(self.cloud, np.concatenate([self.edges, np.asarray(extra).reshape(-1, 2)]))

    def remove_edges(self, mask: np.ndarray) -> "SpatialGraph":
        """Drop the edges selected by a boolean mask over `edges`."""
        return SpatialGraph(self.cloud, self.edges[~np.asarray(mask, dtype=bool)])

    def edge_keys(self) -> set:
        """Edges as a set of unordered vertex-key pairs (ordering-free identity)."""
        keys = self.cloud.keys
        return {
            (min(int(keys[a]), int(keys[b])), max(int(keys[a]), int(keys[b])))
            for a, b in self.edges
        }


def write_edges_csv(graph: SpatialGraph, path: str) -> str:
    """Edge CSV: id_a,id_b with id_a < id_b."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id_a", "id_b"])
        writer.writerows(graph.edges.tolist())
    return path


def read_edges_csv(path: str, cloud: MarkedPointCloud) -> SpatialGraph:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        edges = [(int(a), int(b)) for a, b in reader]
    return SpatialGraph(cloud, np.array(edges, dtype=np.int64).reshape(-1, 2))
