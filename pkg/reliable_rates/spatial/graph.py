"""Region contiguity graph and the intrinsic CAR quadratic forms built on it."""

from __future__ import annotations

import hashlib
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ..errors import DataValidationError, ErrorCategory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric, loop-free contiguity graph over ordered region ids.

    ``edges`` holds index pairs ``(i, j)`` with ``i < j`` into ``node_ids``.
    Construct through :func:`build_graph`, which validates and symmetrises.
    """

    node_ids: tuple[str, ...]
    edges: frozenset[tuple[int, int]]

    @property
    def size(self) -> int:
        return len(self.node_ids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {node: i for i, node in enumerate(self.node_ids)}

    def index_of(self, node: str | int) -> int:
        if isinstance(node, int):
            if not 0 <= node < self.size:
                raise DataValidationError(f"node index {node} out of range")
            return node
        try:
            return self.index[node]
        except KeyError:
            raise DataValidationError(f"unknown node id {node!r}") from None

    @cached_property
    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.empty((0, 2), dtype=np.intp)
        return np.array(sorted(self.edges), dtype=np.intp)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.size)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(nb)) for nb in adj)

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    @property
    def isolated(self) -> tuple[str, ...]:
        return tuple(self.node_ids[i] for i in np.flatnonzero(self.neighbor_counts == 0))

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        e = self.edge_array
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(rows.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))

    def laplacian(self) -> np.ndarray:
        """Dense ``D - W``, the intrinsic CAR precision structure."""
        return np.diag(self.neighbor_counts.astype(float)) - self.adjacency.toarray()

    @cached_property
    def _components(self) -> tuple[int, np.ndarray]:
        n, labels = csgraph.connected_components(self.adjacency, directed=False)
        return int(n), labels

    @property
    def n_components(self) -> int:
        return self._components[0]

    @property
    def component_labels(self) -> np.ndarray:
        return self._components[1]

    def coloring(self) -> tuple[np.ndarray, ...]:
        """Greedy colour classes (independent sets), assigned in sorted-id order."""
        colour = np.full(self.size, -1, dtype=np.int64)
        for i in sorted(range(self.size), key=lambda k: self.node_ids[k]):
            used = {colour[j] for j in self.neighbors[i]}
            c = 0
            while c in used:
                c += 1
            colour[i] = c
        classes = []
        for c in range(int(colour.max()) + 1 if self.size else 0):
            members = np.flatnonzero(colour == c)
            classes.append(members[np.argsort([self.node_ids[k] for k in members])])
        return tuple(classes)

    def permuted(self, order: Sequence[str]) -> AdjacencyGraph:
        """Same graph with nodes listed in ``order``."""
        if sorted(order) != sorted(self.node_ids):
            raise DataValidationError("permutation must list exactly the graph's nodes")
        return build_graph(self.edge_pairs(), order)

    def edge_pairs(self) -> list[tuple[str, str]]:
        return [(self.node_ids[i], self.node_ids[j]) for i, j in sorted(self.edges)]

    def digest(self) -> str:
        """Order-independent sha256 of nodes and edges."""
        h = hashlib.sha256()
        for node in sorted(self.node_ids):
            h.update(node.encode())
            h.update(b"\0")
        for a, b in sorted(tuple(sorted(p)) for p in self.edge_pairs()):
            h.update(f"{a}\t{b}\n".encode())
        return h.hexdigest()


def build_graph(edge_list: Iterable[tuple[str, str]], nodes: Sequence[str]) -> AdjacencyGraph:
    """Validate, deduplicate and symmetrise ``edge_list`` over ``nodes``."""
    node_ids = tuple(str(n) for n in nodes)
    index: dict[str, int] = {}
    for i, node in enumerate(node_ids):
        if node in index:
            raise DataValidationError(f"duplicate node id {node!r}")
        index[node] = i
    edges: set[tuple[int, int]] = set()
    for a, b in edge_list:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise DataValidationError(f"edge ({a!r}, {b!r}) references unknown node {missing!r}")
        if a == b:
            raise DataValidationError(f"self-loop on node {a!r}")
        i, j = index[a], index[b]
        edges.add((min(i, j), max(i, j)))
    graph = AdjacencyGraph(node_ids, frozenset(edges))
    if graph.isolated:
        logger.warning(
            "isolated_nodes",
            extra={
                "event_type": "isolated_nodes",
                "error_category": ErrorCategory.VALIDATION.value,
            },
        )
    return graph


def read_edges(path: str | Path) -> list[tuple[str, str]]:
    """Parse ``id1<TAB>id2`` lines; blank lines and ``#`` comments are skipped."""
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split("\t")]
            if len(parts) != 2 or not all(parts):
                raise DataValidationError(f"{path}:{lineno}: expected 'id1<TAB>id2'")
            pairs.append((parts[0], parts[1]))
    return pairs


def load_graph(path: str | Path, nodes: Sequence[str] | None = None) -> AdjacencyGraph:
    """Graph from an edge file; nodes default to every id the file mentions."""
    pairs = read_edges(path)
    if nodes is None:
        nodes = sorted({n for pair in pairs for n in pair})
    return build_graph(pairs, nodes)


def icar_quadratic(z: np.ndarray, g: AdjacencyGraph) -> float:
    """Sum of squared differences over edges, ``z' (D - W) z``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (g.size,):
        raise DataValidationError(f"expected vector of length {g.size}, got shape {z.shape}")
    e = g.edge_array
    d = z[e[:, 0]] - z[e[:, 1]]
    return float(d @ d)


def car_full_conditional(
    node: str | int, z: np.ndarray, tau2: float, g: AdjacencyGraph
) -> tuple[float, float]:
    """Mean and variance of ``z_i`` given its neighbours under the intrinsic CAR."""
    i = g.index_of(node)
    nb = g.neighbors[i]
    if not nb:
        raise DataValidationError(f"node {g.node_ids[i]!r} has no neighbours")
    z = np.asarray(z, dtype=float)
    return float(z[list(nb)].mean()), tau2 / len(nb)


def car_conditional_moments(
    nodes: np.ndarray, z: np.ndarray, tau2: float, g: AdjacencyGraph
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`car_full_conditional` for non-isolated ``nodes``."""
    m = g.neighbor_counts[nodes].astype(float)
    sums = g.adjacency[nodes] @ z
    return sums / m, tau2 / m
