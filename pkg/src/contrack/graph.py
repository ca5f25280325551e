"""Weighted undirected communication graphs and their Laplacian spectra.

The consensus machinery needs three spectral objects from the graph: the
ordered positive Laplacian eigenvalues, the matching eigenvector block, and
the algebraic-connectivity test. All of them are computed once at
construction and cached on the graph value.
"""

from dataclasses import dataclass

import numpy as np

from . import constants
from .linalg import Spectrum, sym_eigen


class GraphError(ValueError):
    """Adjacency matrix fails the undirected-weighted-graph contract."""


class DisconnectedGraphError(RuntimeError):
    """Raised when a spectral quantity requires a connected graph."""


@dataclass(frozen=True)
class CommGraph:
    """Communication topology with cached Laplacian spectral data.

    u_matrix holds the eigenvectors paired with positive_eigenvalues; both
    are only meaningful for connected graphs (otherwise extra zero
    eigenvalues leak into the trailing block).
    """

    adjacency: np.ndarray
    laplacian: np.ndarray
    spectrum: Spectrum
    positive_eigenvalues: np.ndarray
    u_matrix: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]


def build_graph(adjacency) -> CommGraph:
    """Validate an adjacency matrix and build the graph with its spectrum.

    Requirements: square, at least 2 vertices, symmetric to within
    ADJACENCY_SYMMETRY_TOL, zero diagonal (no self-edges), nonnegative
    weights. Violations raise GraphError naming the offending entry.
    """
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {a.shape}")
    n = a.shape[0]
    if n < 2:
        raise GraphError(f"need at least 2 agents, got {n}")
    if not np.all(np.isfinite(a)):
        raise GraphError("adjacency contains non-finite weights")
    asym = np.abs(a - a.T)
    if asym.max() > constants.ADJACENCY_SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise GraphError(
            f"adjacency is not symmetric at entry ({i}, {j}): "
            f"{a[i, j]!r} vs {a[j, i]!r}"
        )
    diag = np.abs(np.diag(a))
    if diag.max() > 0.0:
        i = int(np.argmax(diag))
        raise GraphError(f"self-edge not allowed: nonzero diagonal at ({i}, {i})")
    if a.min() < 0.0:
        i, j = np.unravel_index(np.argmin(a), a.shape)
        raise GraphError(f"negative weight at entry ({i}, {j}): {a[i, j]!r}")

    a = 0.5 * (a + a.T)
    laplacian = np.diag(a.sum(axis=1)) - a
    spectrum = sym_eigen(laplacian)
    return CommGraph(
        adjacency=a,
        laplacian=laplacian,
        spectrum=spectrum,
        positive_eigenvalues=spectrum.values[1:].copy(),
        u_matrix=spectrum.vectors[:, 1:].copy(),
    )


def is_connected(g: CommGraph) -> bool:
    """Spectral connectivity: second-smallest Laplacian eigenvalue above threshold.

    Decided spectrally (not by traversal) so the answer is always consistent
    with the eigenvalue data the consensus-gain bound consumes.
    """
    return bool(g.spectrum.values[1] > constants.CONNECTIVITY_TOL)


def lambda_min_positive(g: CommGraph) -> float:
    """Smallest positive Laplacian eigenvalue (algebraic connectivity weight)."""
    if not is_connected(g):
        raise DisconnectedGraphError(
            "graph is disconnected: the observer stability conditions assume a "
            "fixed connected communication graph, so the consensus spectral gap "
            "is undefined"
        )
    return float(g.positive_eigenvalues[0])
