import math
from io import StringIO

import networkx as nx
import numpy as np
import pytest

from manet_sim.config import ScenarioConfig, validate_config
from manet_sim.mobility import Point
from manet_sim.runner import Network

RANGE = 250.0


def static_config(nodes: int, protocol: str = "aodv", **overrides) -> ScenarioConfig:
    """A motionless, jitter-free scenario without traffic."""
    horizon = overrides.pop("horizon", 50.0)
    values = {
        "protocol": protocol,
        "nodes": nodes,
        "area_width": 1000.0,
        "area_height": 1000.0,
        "horizon": horizon,
        "pause_time": horizon,
        "flows": 0,
        "traffic_start": 0.0,
        "broadcast_jitter": 0.0,
        "dsdv_periodic_jitter": 0.0,
        "dsdv_triggered_jitter": 0.0,
    }
    values.update(overrides)
    return validate_config(values)


def line_placement(n: int, spacing: float = 200.0, y: float = 10.0) -> list[Point]:
    """Nodes on a line; with the default spacing only neighbours hear each other."""
    return [(i * spacing, y) for i in range(n)]


def static_network(
    placement: list[Point],
    protocol: str = "aodv",
    trace: StringIO | None = None,
    **overrides,
) -> Network:
    width = max(1000.0, max(x for x, _ in placement))
    height = max(1000.0, max(y for _, y in placement))
    overrides.setdefault("area_width", width)
    overrides.setdefault("area_height", height)
    config = static_config(len(placement), protocol, **overrides)
    return Network(config, trace, placement)


def unit_disc_graph(points: list[Point], radius: float = RANGE) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(points)))
    for i, (xi, yi) in enumerate(points):
        for j in range(i + 1, len(points)):
            xj, yj = points[j]
            if np.hypot(xj - xi, yj - yi) <= radius:
                graph.add_edge(i, j)
    return graph


def random_topology(seed: int, n: int) -> tuple[list[Point], nx.Graph, float]:
    """Uniform random placement whose unit-disc graph is connected."""
    rng = np.random.default_rng(seed)
    side = 150.0 * math.sqrt(n)
    while True:
        points = [(float(x), float(y)) for x, y in rng.uniform(0.0, side, size=(n, 2))]
        graph = unit_disc_graph(points)
        if nx.is_connected(graph):
            return points, graph, side


def trace_lines(trace: StringIO, op: str, ptype: str) -> list[list[str]]:
    """Split trace lines with the given operation and packet type."""
    rows = [line.split() for line in trace.getvalue().splitlines()]
    return [r for r in rows if r[0] == op and r[4] == ptype]


@pytest.fixture(scope="session")
def topologies() -> list[tuple[list[Point], nx.Graph, float]]:
    """50 connected static topologies of 5 to 20 nodes."""
    return [random_topology(seed, 5 + seed % 16) for seed in range(50)]


@pytest.fixture
def small_config() -> ScenarioConfig:
    """A short mobile scenario that still exercises every code path."""
    return validate_config(
        {
            "nodes": 12,
            "area_width": 600.0,
            "area_height": 300.0,
            "horizon": 40.0,
            "flows": 4,
            "traffic_start": 5.0,
            "pause_time": 0.0,
        }
    )
