"""Shared fixtures: the square-formation experiment family."""

import os

import numpy as np
import pytest

from contrack.gains import ObserverGains
from contrack.linalg import projection_matrix
from contrack.sim import Scenario

SCENARIOS_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")

SQUARE_AGENTS = np.array(
    [[-10.0, 10.0, 2.0], [10.0, 10.0, 2.0], [10.0, -10.0, 2.0], [-10.0, -10.0, 2.0]]
)

TARGET_CV_POSITION = np.array([0.0, -15.0, 0.0])
TARGET_CV_VELOCITY = np.array([0.0, 0.5, 0.0])

TARGET_CA_BLOCKS = np.array(
    [[0.0, 10.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.15, 0.01]]
)


def ring_adjacency(n: int = 4) -> np.ndarray:
    a = np.zeros((n, n))
    for i in range(n):
        a[i, (i + 1) % n] = a[(i + 1) % n, i] = 1.0
    return a


def gains_cv() -> ObserverGains:
    return ObserverGains(k=(5.0, 3.5), alpha=15.9, delta=0.8, gamma=0.1)


def gains_ca() -> ObserverGains:
    return ObserverGains(k=(10.0, 3.7, 0.5), alpha=15.5, delta=0.3, gamma=0.1)


def square_projection_blocks(target_pos, lossy=()):
    blocks = []
    for i, p in enumerate(SQUARE_AGENTS):
        if i in lossy:
            blocks.append(np.zeros((3, 3)))
            continue
        d = np.asarray(target_pos, dtype=float) - p
        blocks.append(projection_matrix(d / np.linalg.norm(d)))
    return blocks


def scenario_cv(**overrides) -> Scenario:
    base = dict(
        gains=gains_cv(),
        adjacency=ring_adjacency(),
        agent_paths=tuple(SQUARE_AGENTS),
        target_blocks=np.array([TARGET_CV_POSITION, TARGET_CV_VELOCITY]),
        step=1e-3,
        duration=30.0,
        seed=1,
        noise_std_deg=0.01,
    )
    base.update(overrides)
    return Scenario(**base)


@pytest.fixture
def square_graph():
    from contrack.graph import build_graph

    return build_graph(ring_adjacency())
