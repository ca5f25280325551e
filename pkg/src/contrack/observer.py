"""Per-agent distributed observer: correction term, state derivative, and the
bearing measurement constructor.

The observer replicates an M-integrator chain and injects a single shared
correction into every level, scaled by that level's gain. The correction
mixes an innovation term against the agent's own observation with a
first-order consensus term on the first state block, which is the only
quantity an agent ever broadcasts.
"""

from dataclasses import dataclass

import numpy as np

from .gains import ObserverGains
from .linalg import projection_matrix, symmetrize


@dataclass(frozen=True)
class AgentState:
    """One agent's stacked estimate: blocks[m] estimates the m-th derivative."""

    agent_id: int
    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 2:
            raise ValueError(f"blocks must be (order, dim), got shape {blocks.shape}")
        if not np.all(np.isfinite(blocks)):
            raise ValueError("agent state contains non-finite entries")
        object.__setattr__(self, "blocks", blocks)

    @property
    def order(self) -> int:
        return self.blocks.shape[0]


@dataclass(frozen=True)
class Measurement:
    """Observation pair (psi, y) for one agent; zero pair when unavailable."""

    agent_id: int
    available: bool
    psi: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if not self.available and (np.any(psi != 0.0) or np.any(y != 0.0)):
            raise ValueError("unavailable measurements must carry exact zero (psi, y)")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class NeighborEstimate:
    """A neighbor's broadcast first block together with the edge weight."""

    neighbor_id: int
    weight: float
    first_block: np.ndarray

    def __post_init__(self):
        if self.weight <= 0.0:
            raise ValueError("edge weight must be positive")
        object.__setattr__(
            self, "first_block", np.asarray(self.first_block, dtype=float)
        )


def unavailable_measurement(agent_id: int, dim: int = 3) -> Measurement:
    return Measurement(
        agent_id=agent_id, available=False, psi=np.zeros((dim, dim)), y=np.zeros(dim)
    )


def bearing_measurement(agent_pos, bearing, agent_id: int = 0) -> Measurement:
    """Measurement pair from a unit bearing: psi is the projector orthogonal to
    the bearing and y projects the agent's own (known) position."""
    psi = projection_matrix(bearing)
    y = psi @ np.asarray(agent_pos, dtype=float)
    return Measurement(agent_id=agent_id, available=True, psi=psi, y=y)


def correction_term(state: AgentState, meas: Measurement, neighbors, alpha: float):
    """Innovation plus consensus correction shared by all observer levels.

    With no measurement the psi/y pair is zero and the correction degrades
    gracefully to pure consensus.
    """
    x0 = state.blocks[0]
    delta = meas.y - symmetrize(meas.psi) @ x0
    for nb in neighbors:
        delta = delta - alpha * nb.weight * (x0 - nb.first_block)
    return delta


def observer_derivative(state: AgentState, delta, gains: ObserverGains) -> AgentState:
    """Time derivative of the stacked estimate: chain replica plus k_m * delta."""
    if gains.order != state.order:
        raise ValueError(
            f"gain vector has {gains.order} entries but the state has "
            f"{state.order} blocks"
        )
    delta = np.asarray(delta, dtype=float)
    d = np.empty_like(state.blocks)
    d[:-1] = state.blocks[1:]
    d[-1] = 0.0
    d += np.asarray(gains.k)[:, None] * delta[None, :]
    return AgentState(agent_id=state.agent_id, blocks=d)


def broadcast_payload(state: AgentState) -> np.ndarray:
    """The only data an agent shares: a copy of its first state block."""
    return state.blocks[0].copy()
