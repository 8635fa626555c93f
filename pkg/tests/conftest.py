import numpy as np
import pytest

from consensus_lab.design import SystemDynamics, solve_care, triple_integrator
from consensus_lab.graph import DirectedGraph

# reference third-order integrator design, rounded to 4 decimals
REF_P = np.array([
    [3.0861, -0.6245, -0.5186],
    [-0.6245, 1.1602, -0.5573],
    [-0.5186, -0.5573, 0.9850],
])
REF_K = -np.array([[0.6285, 1.3525, 2.1113]])
REF_GAMMA = np.array([
    [0.3950, 0.8500, 1.3269],
    [0.8500, 1.8292, 2.8554],
    [1.3269, 2.8554, 4.4574],
])

# bundled 7-node topology: leader 0 feeds only follower 1
SEVEN_NODE_PAIRS = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1), (2, 5), (4, 2), (3, 6)]


@pytest.fixture
def tri():
    return triple_integrator()


@pytest.fixture
def tri_design(tri):
    return solve_care(tri)


@pytest.fixture
def scalar_sys():
    return SystemDynamics(np.array([[0.0]]), np.array([[1.0]]))


@pytest.fixture
def chain():
    return DirectedGraph(3, (0,), ((0, 1, 1.0), (1, 2, 1.0)))


def seven_node_graph(seed=9):
    rng = np.random.default_rng(seed)
    return DirectedGraph(7, (0,), tuple((j, i, rng.uniform(0, 3)) for j, i in SEVEN_NODE_PAIRS))
