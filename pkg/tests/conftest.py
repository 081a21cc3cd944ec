import numpy as np
import pytest

from nnformation.graph import Topology

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_topology(rng, n, p=0.4, pinned=None, max_weight=3.0):
    """Random undirected weighted graph with at least one pin."""
    a = np.triu(rng.uniform(0.1, max_weight, (n, n)) * (rng.random((n, n)) < p), 1)
    a = a + a.T
    d = np.zeros(n)
    if pinned is None:
        pinned = rng.choice(n, size=rng.integers(1, n + 1), replace=False)
    d[list(pinned)] = rng.uniform(0.2, 2.0, len(pinned))
    return Topology(a, d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def tiny_doc(**overrides):
    """A 3-agent scenario that integrates in well under a second."""
    doc = {
        "name": "tiny",
        "topology": {"n": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0], [0, 2, 1.0]], "pinning": [1.0, 0.0, 0.0]},
        "formation": {"generator": "hexagon", "radius": 1.0},
        "agents": {
            "positions": [[1.0, 0.0], [0.0, 1.0], [-1.0, -0.5]],
            "velocities": [[0.0, 0.0], [0.5, 0.0], [0.0, -0.5]],
            "drift": "benchmark",
            "alpha": [0.5, -0.2, 0.3],
            "beta": [0.7, -0.2, 0.4],
        },
        "leader": {"profile": "constant_velocity", "position": [0.0, 0.0], "velocity": [0.0, 0.0]},
        "nn": {"lower": [-3, -3, -3, -3], "upper": [3, 3, 3, 3], "counts": [2, 2, 2, 2], "gamma": 5.0,
               "sigma": 0.05},
        "gains": {"gamma_x": 6.0, "gamma_v": 12.0},
        "sim": {"dt": 0.01, "duration": 1.0, "sample_period": 0.05, "burn_in": 0.0,
                "lyapunov_mode": "surrogate"},
        "outputs": {"plots": True, "csv": "trajectory.csv"},
    }
    for path, value in overrides.items():
        keys = path.split(".")
        node = doc
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return doc
