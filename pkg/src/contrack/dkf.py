"""Consensus-on-information distributed Kalman filter baseline.

A standard information-form filter for a constant-velocity target: each agent
adds its local measurement information, the network averages information
pairs with Metropolis weights for a fixed number of consensus rounds, and the
pair is propagated through the exactly discretized double integrator. Used as
the communication-cost and convergence comparison point for the proposed
observer; it is deliberately a textbook baseline, not a contribution.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .graph import CommGraph, build_graph
from .linalg import symmetrize
from .sim import K_DIM, Scenario, _init_draws, dkf_floats_per_step, measurement_stream

STATE_DIM = 6

# Baseline tuning: per-step process noise, bearing pseudo-measurement noise,
# and initial information weight.
PROCESS_NOISE = np.eye(STATE_DIM)
MEASUREMENT_NOISE = 0.01 * np.eye(K_DIM)
INITIAL_INFORMATION = np.eye(STATE_DIM)


@dataclass(frozen=True)
class InformationPair:
    """Information matrix / vector pair describing one agent's posterior."""

    omega: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        omega = symmetrize(self.omega)
        q = np.asarray(self.q, dtype=float)
        if omega.shape != (STATE_DIM, STATE_DIM) or q.shape != (STATE_DIM,):
            raise ValueError("information pair must be 6x6 and 6")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "q", q)


def metropolis_weights(adjacency) -> np.ndarray:
    """Doubly stochastic averaging weights from vertex degrees."""
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    degrees = (a > 0.0).sum(axis=1)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and a[i, j] > 0.0:
                w[i, j] = 1.0 / (1.0 + max(degrees[i], degrees[j]))
        w[i, i] = 1.0 - w[i].sum()
    return w


def transition_matrix(h: float) -> np.ndarray:
    f = np.eye(STATE_DIM)
    f[:K_DIM, K_DIM:] = h * np.eye(K_DIM)
    return f


def extract_estimate(pair: InformationPair) -> np.ndarray:
    """Posterior state estimate; fails loudly when information is singular."""
    try:
        return np.linalg.solve(pair.omega, pair.q)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "insufficient information: singular information matrix"
        ) from exc


def dkf_step(pairs, measurements, consensus_iters: int, graph: CommGraph, h: float):
    """One filter cycle: local information update, consensus rounds, prediction.

    measurements is a sequence of (psi, y) per agent, with zero pairs for
    agents lacking a measurement. Returns the propagated pairs and the
    post-consensus state estimates.
    """
    if consensus_iters < 1:
        raise ValueError("need at least one consensus iteration")
    n = graph.n_agents
    if len(pairs) != n or len(measurements) != n:
        raise ValueError("pairs and measurements must cover every agent")

    r_inv = np.linalg.inv(MEASUREMENT_NOISE)
    omegas = np.empty((n, STATE_DIM, STATE_DIM))
    qs = np.empty((n, STATE_DIM))
    for i, (pair, (psi, y)) in enumerate(zip(pairs, measurements)):
        hmat = np.zeros((K_DIM, STATE_DIM))
        hmat[:, :K_DIM] = psi
        omegas[i] = pair.omega + hmat.T @ r_inv @ hmat
        qs[i] = pair.q + hmat.T @ r_inv @ np.asarray(y, dtype=float)

    weights = metropolis_weights(graph.adjacency)
    for _ in range(consensus_iters):
        omegas = np.einsum("ij,jkl->ikl", weights, omegas)
        qs = weights @ qs

    estimates = np.empty((n, STATE_DIM))
    f = transition_matrix(h)
    out = []
    for i in range(n):
        fused = InformationPair(omega=omegas[i], q=qs[i])
        x = extract_estimate(fused)
        estimates[i] = x
        cov = np.linalg.inv(fused.omega)
        cov = f @ cov @ f.T + PROCESS_NOISE
        omega_next = np.linalg.inv(symmetrize(cov))
        omega_next = symmetrize(omega_next)
        out.append(InformationPair(omega=omega_next, q=omega_next @ (f @ x)))
    return out, estimates


@dataclass(frozen=True)
class DkfLog:
    """Time series from a baseline run, schema-compatible with the observer log."""

    t: np.ndarray
    pos_errors: np.ndarray
    vel_errors: np.ndarray
    comm_floats: np.ndarray
    bearings: np.ndarray
    available: np.ndarray
    bearing_checksum: str

    @property
    def n_agents(self) -> int:
        return self.pos_errors.shape[1]


def run_dkf(scenario: Scenario, consensus_iters: int = 2) -> DkfLog:
    """Run the baseline on a scenario, consuming the scenario's measurement
    stream exactly as the observer run does (shared seed, shared stream)."""
    g = build_graph(scenario.adjacency)
    n = g.n_agents
    h = scenario.step
    steps = int(round(scenario.duration / h))
    n_rows = steps + 1

    rng = np.random.default_rng(scenario.seed)
    radii, fallback = _init_draws(rng, n, scenario.init_range)

    t_arr = np.empty(n_rows)
    pos_err = np.empty((n_rows, n))
    vel_err = np.empty((n_rows, n))
    comm = np.empty(n_rows)
    bearings_log = np.empty((n_rows, n, K_DIM))
    avail_log = np.empty((n_rows, n), dtype=bool)

    per_step = dkf_floats_per_step(STATE_DIM, consensus_iters)
    pairs = None
    stream = measurement_stream(scenario, rng, n_rows)
    for s, (t, positions, truth_now, bearings, avail, _theta, _phase) in enumerate(
        stream
    ):
        if s == 0:
            directions = np.where(avail[:, None], bearings, fallback)
            p_init = positions + radii[:, None] * directions
            if scenario.init_average:
                p_init = np.broadcast_to(p_init.mean(axis=0), (n, K_DIM)).copy()
            pairs = []
            for i in range(n):
                x0 = np.concatenate([p_init[i], np.zeros(K_DIM)])
                pairs.append(
                    InformationPair(
                        omega=INITIAL_INFORMATION.copy(),
                        q=INITIAL_INFORMATION @ x0,
                    )
                )

        meas = []
        for i in range(n):
            if avail[i]:
                psi = np.eye(K_DIM) - np.outer(bearings[i], bearings[i])
                meas.append((psi, psi @ positions[i]))
            else:
                meas.append((np.zeros((K_DIM, K_DIM)), np.zeros(K_DIM)))

        pairs, estimates = dkf_step(pairs, meas, consensus_iters, g, h)

        truth_pos = truth_now[0]
        truth_vel = truth_now[1] if truth_now.shape[0] > 1 else np.zeros(K_DIM)
        t_arr[s] = t
        pos_err[s] = np.linalg.norm(estimates[:, :K_DIM] - truth_pos[None, :], axis=1)
        vel_err[s] = np.linalg.norm(estimates[:, K_DIM:] - truth_vel[None, :], axis=1)
        comm[s] = s * per_step
        bearings_log[s] = bearings
        avail_log[s] = avail

    checksum = hashlib.sha256(
        bearings_log.tobytes() + avail_log.tobytes()
    ).hexdigest()
    return DkfLog(
        t=t_arr,
        pos_errors=pos_err,
        vel_errors=vel_err,
        comm_floats=comm,
        bearings=bearings_log,
        available=avail_log,
        bearing_checksum=checksum,
    )


def dkf_log_to_csv(log: DkfLog) -> str:
    """CSV with the observer schema's shared columns (errors and comm cost)."""
    n = log.n_agents
    cols = ["t"]
    cols += [f"err_pos_agent{i + 1}" for i in range(n)]
    cols += [f"err_vel_agent{i + 1}" for i in range(n)]
    cols += ["comm_floats"]
    lines = [",".join(cols)]
    for s in range(log.t.size):
        row = [f"{log.t[s]:.12g}"]
        row += [f"{log.pos_errors[s, i]:.12g}" for i in range(n)]
        row += [f"{log.vel_errors[s, i]:.12g}" for i in range(n)]
        row.append(f"{log.comm_floats[s]:.12g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
