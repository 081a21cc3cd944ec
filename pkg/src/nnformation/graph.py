"""Communication topology: adjacency, Laplacians, connectivity and spectra."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ZERO_EIG_TOL = 1e-9


class TopologyError(ValueError):
    """A topology violates one of its structural invariants."""


class SpectralError(RuntimeError):
    """The symmetric eigensolver failed to converge."""


@dataclass(frozen=True)
class Topology:
    """Weighted undirected follower graph plus leader pinning gains.

    ``weights[i, j]`` is the edge weight a_ij and ``pinning[i]`` is d_i,
    which is positive iff agent i observes the leader directly.
    """

    weights: np.ndarray
    pinning: np.ndarray

    def __post_init__(self):
        a = np.array(self.weights, dtype=float)
        d = np.array(self.pinning, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise TopologyError(f"weights must be a square matrix, got shape {a.shape}")
        n = a.shape[0]
        if n < 1:
            raise TopologyError("agent count n must be positive")
        if d.shape != (n,):
            raise TopologyError(f"pinning must have length n={n}, got {d.shape[0]}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(d))):
            raise TopologyError("weights and pinning must be finite")
        if np.any(np.diag(a) != 0):
            raise TopologyError("self-loops are not allowed (a_ii must be 0)")
        if np.any(a < 0):
            raise TopologyError("edge weights must be non-negative")
        if not np.array_equal(a, a.T):
            raise TopologyError("weights must be symmetric (undirected graph)")
        if np.any(d < 0):
            raise TopologyError("pinning gains must be non-negative")
        if not np.any(d > 0):
            raise TopologyError("no pinned agent: at least one d_i must be positive")
        a.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "pinning", d)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[float]], pinning: Sequence[float]) -> "Topology":
        """Build from ``[i, j, weight]`` triples with 0-based indices."""
        if n < 1:
            raise TopologyError("agent count n must be positive")
        a = np.zeros((n, n))
        for edge in edges:
            if len(edge) != 3:
                raise TopologyError(f"edge {list(edge)} must be [i, j, weight]")
            i, j, w = edge
            if int(i) != i or int(j) != j:
                raise TopologyError(f"edge {list(edge)} has non-integer endpoints")
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"edge {list(edge)} references an agent outside 0..{n - 1}")
            if i == j:
                raise TopologyError(f"edge {list(edge)} is a self-loop")
            a[i, j] = a[j, i] = float(w)
        return cls(a, np.asarray(pinning, dtype=float))

    @classmethod
    def ring(cls, n: int, pinned: Iterable[int], weight: float = 1.0) -> "Topology":
        """Cycle 0-1-...-(n-1)-0 with unit pinning on ``pinned``."""
        # a 2-cycle would list the same edge twice
        edges = {tuple(sorted((i, (i + 1) % n))) for i in range(n) if n > 1}
        edges = [(i, j, weight) for i, j in sorted(edges)]
        d = np.zeros(n)
        d[list(pinned)] = 1.0
        return cls.from_edges(n, edges, d)

    def edges(self) -> list[list[float]]:
        """Upper-triangular ``[i, j, weight]`` list, inverse of :meth:`from_edges`."""
        i, j = np.nonzero(np.triu(self.weights))
        return [[int(a), int(b), float(self.weights[a, b])] for a, b in zip(i, j)]


@dataclass(frozen=True)
class SpectralReport:
    laplacian_eigenvalues: np.ndarray
    augmented_min_eigenvalue: float
    connected: bool
    components: int

    @property
    def zero_multiplicity(self) -> int:
        return int(np.sum(np.abs(self.laplacian_eigenvalues) <= ZERO_EIG_TOL))


def laplacian(topology: Topology) -> np.ndarray:
    """L = diag(row sums of A) - A."""
    a = topology.weights
    return np.diag(a.sum(axis=1)) - a


def augmented_laplacian(topology: Topology) -> np.ndarray:
    """L + diag(d), the matrix coupling formation errors to transformed states."""
    return laplacian(topology) + np.diag(topology.pinning)


def connected_components(topology: Topology) -> int:
    """Count components by breadth-first search over nonzero edges."""
    n = topology.n
    seen = np.zeros(n, dtype=bool)
    count = 0
    for root in range(n):
        if seen[root]:
            continue
        count += 1
        seen[root] = True
        queue = deque([root])
        while queue:
            k = queue.popleft()
            for nb in np.flatnonzero(topology.weights[k]):
                if not seen[nb]:
                    seen[nb] = True
                    queue.append(nb)
    return count


def is_connected(topology: Topology) -> bool:
    return connected_components(topology) == 1


def _eigvalsh(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"symmetric eigensolver did not converge: {exc}") from exc


def spectral_report(topology: Topology) -> SpectralReport:
    eig = np.sort(_eigvalsh(laplacian(topology)))
    aug = _eigvalsh(augmented_laplacian(topology))
    comps = connected_components(topology)
    return SpectralReport(
        laplacian_eigenvalues=eig,
        augmented_min_eigenvalue=float(aug.min()),
        connected=comps == 1,
        components=comps,
    )


def kron_identity(m: np.ndarray, d: int) -> np.ndarray:
    """m ⊗ I_d: block (i, j) equals m_ij * I_d."""
    if d < 1:
        raise ValueError("block dimension must be >= 1")
    return np.kron(np.asarray(m, dtype=float), np.eye(d))


def row_normalized_adjacency(topology: Topology) -> np.ndarray:
    """D^-1 A; requires every agent to have positive degree."""
    deg = topology.weights.sum(axis=1)
    if np.any(deg <= 0):
        raise TopologyError("row normalization needs every agent to have a neighbour")
    return topology.weights / deg[:, None]
