"""Undirected weighted communication graphs and their Laplacian decomposition."""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np
from scipy import linalg

from active_consensus.errors import DisconnectedGraphError, InvalidInputError

logger = logging.getLogger(__name__)

GENERATORS = ("ring", "path", "complete")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def _check_candidate(candidate: np.ndarray) -> np.ndarray:
    matrix = np.asarray(candidate, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidInputError(f"adjacency must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidInputError("adjacency has non-finite entries")
    if np.any(matrix < 0):
        raise InvalidInputError("adjacency has negative weights")
    if not np.array_equal(matrix, matrix.T):
        raise InvalidInputError("adjacency is not symmetric")
    if np.any(np.diag(matrix) != 0):
        raise InvalidInputError("adjacency has non-zero diagonal entries")
    return matrix


def is_connected(candidate: np.ndarray) -> bool:
    """Check connectivity by breadth-first reachability over positive-weight edges.

    Args:
        candidate: Symmetric, non-negative adjacency matrix with zero diagonal

    Returns:
        True if every pair of nodes is joined by a path

    Raises:
        InvalidInputError: If the candidate is not a valid adjacency matrix
    """
    matrix = _check_candidate(candidate)
    if matrix.shape[0] == 0:
        return False
    graph = nx.from_numpy_array(matrix)
    return nx.is_connected(graph)


@dataclass(frozen=True, eq=False)
class Topology:
    """Connected undirected graph of ``n`` agents with edge weights ``a_ij``."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        matrix = _check_candidate(self.adjacency)
        if matrix.shape[0] < 2:
            raise InvalidInputError("a topology needs at least two agents")
        if not is_connected(matrix):
            raise DisconnectedGraphError("communication graph is not connected")
        object.__setattr__(self, "adjacency", _frozen(matrix))

    @property
    def n(self) -> int:
        """Number of agents."""
        return self.adjacency.shape[0]

    @classmethod
    def from_generator(cls, kind: str, n: int, weight: float = 1.0) -> "Topology":
        """Build a named topology with uniform edge weight.

        Args:
            kind: One of 'ring', 'path' or 'complete'
            n: Number of agents
            weight: Weight of every edge (> 0)

        Returns:
            Topology instance
        """
        if weight <= 0:
            raise InvalidInputError("edge weight must be positive")
        if kind == "ring":
            if n < 3:
                raise InvalidInputError("a ring needs at least three agents")
            graph = nx.cycle_graph(n)
        elif kind == "path":
            graph = nx.path_graph(n)
        elif kind == "complete":
            graph = nx.complete_graph(n)
        else:
            raise InvalidInputError(
                f"unknown topology generator '{kind}'; expected one of {', '.join(GENERATORS)}"
            )
        adjacency = nx.to_numpy_array(graph, nodelist=range(n), weight=None) * weight
        return cls(adjacency)

    def without(self, agents: Sequence[int]) -> "Topology":
        """Remove agents (rows and columns) and re-validate connectivity."""
        drop = set(agents)
        keep = [i for i in range(self.n) if i not in drop]
        return Topology(self.adjacency[np.ix_(keep, keep)])

    @property
    def laplacian(self) -> np.ndarray:
        """Graph Laplacian ``L = D - A``.

        Returns:
            ``n x n`` symmetric matrix with zero row sums
        """
        return laplacian(self)


def laplacian(topology: Topology) -> np.ndarray:
    """Build the Laplacian of a topology.

    Args:
        topology: Validated topology

    Returns:
        ``L = D - A``; rows and columns sum to zero
    """
    adjacency = topology.adjacency
    return np.diag(adjacency.sum(axis=1)) - adjacency


def symmetric_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    return linalg.eigvalsh(np.asarray(matrix, dtype=float))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Orthonormal transform ``T = [r N]`` and reduced Laplacian ``L+ = N^T L N``."""

    transform: np.ndarray
    reduced_laplacian: np.ndarray
    laplacian: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.transform.shape[0]

    @property
    def consensus_direction(self) -> np.ndarray:
        """First column of ``T``, the normalised ones vector."""
        return self.transform[:, 0]

    @property
    def complement(self) -> np.ndarray:
        """Columns 2..n of ``T``, an orthonormal basis of the disagreement subspace."""
        return self.transform[:, 1:]


def householder_completion(n: int) -> np.ndarray:
    """Orthonormal ``T`` whose first column is ``ones(n) / sqrt(n)``.

    Uses the Householder reflection ``H = I - 2 u u^T / (u^T u)`` with
    ``u = e_1 - r``, which maps ``e_1`` to ``r``. ``H`` is symmetric and
    orthogonal, so its columns form the required basis.
    """
    if n < 2:
        raise InvalidInputError("completion needs n >= 2")
    direction = np.full(n, 1.0 / np.sqrt(n))
    u = -direction
    u[0] += 1.0
    return np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)


def spectral_decomposition(topology: Topology) -> SpectralDecomposition:
    """Decompose the Laplacian of a connected topology.

    Args:
        topology: Connected topology

    Returns:
        SpectralDecomposition with ``T^T L T = diag(0, L+)``
    """
    lap = laplacian(topology)
    transform = householder_completion(topology.n)
    complement = transform[:, 1:]
    reduced = complement.T @ lap @ complement
    reduced = 0.5 * (reduced + reduced.T)
    logger.debug("spectral decomposition for n=%d", topology.n)
    return SpectralDecomposition(
        transform=_frozen(transform),
        reduced_laplacian=_frozen(reduced),
        laplacian=_frozen(lap),
    )
