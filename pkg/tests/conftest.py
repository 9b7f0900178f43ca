import os

import numpy as np
import pytest

from chemdist.core.graph import SpatialGraph
from chemdist.core.point_process import MarkedPointCloud, Window
from chemdist.core.seeding import vertex_keys

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")


@pytest.fixture(autouse=True)
def chemdist_env(monkeypatch, tmp_path):
    """Serial replicate farm, outputs under tmp_path, configs from the repo."""
    monkeypatch.setenv("CHEMDIST_THREADS", "1")
    monkeypatch.setenv("CHEMDIST_OUTPUT_DIR", str(tmp_path / "outputs"))
    monkeypatch.setenv("CHEMDIST_CONFIG_DIR", CONFIG_DIR)


def make_graph(positions, edges=(), side=None, center=None, marks=None, lattice=False):
    """Graph on hand-placed vertices; the measurement window defaults to a box holding them all."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    n, dim = positions.shape
    if side is None:
        side = 2.0 * float(np.abs(positions).max()) + 2.0
    window = Window(dim=dim, side=side, center=center)
    marks = np.full(n, 0.5) if marks is None else np.asarray(marks, dtype=float)
    cloud = MarkedPointCloud(positions, marks, window, seed=0, keys=vertex_keys(0, n), lattice=lattice)
    return SpatialGraph(cloud, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def line_graph(count, start=0, side=None, center=None):
    """Unit-spaced vertices start, start+1, ... joined to their successors."""
    positions = np.arange(start, start + count, dtype=float)
    edges = [(i, i + 1) for i in range(count - 1)]
    return make_graph(positions, edges, side=side, center=center, lattice=True)
