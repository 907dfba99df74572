"""Network topologies: construction, validation, Laplacians and spectra.

The estimator runs on undirected, simple, static graphs.  The regular
k-hop ring family used in topology sweeps is circulant, so its Laplacian
spectrum has a closed form; the dense symmetric eigensolver remains the
general route for arbitrary graphs and the closed form doubles as a test
oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import NumericError, ParameterError

__all__ = [
    "Graph",
    "ConnectivityReport",
    "ring_khop_graph",
    "neighbor_closure",
    "laplacian",
    "laplacian_spectrum",
    "circulant_khop_spectrum",
    "validate_connected",
    "read_edge_list",
]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on agents 0..n-1.

    Edges are stored canonically: each undirected pair once, as (i, j)
    with i < j, sorted ascending.  The canonical form makes serialization
    and hashing deterministic.  Instances are immutable and safe to share
    across threads.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __init__(self, n, edges):
        n = int(n)
        if n < 1:
            raise ParameterError(f"agent count must be >= 1, got {n}")
        canonical = []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ParameterError(f"self-loop at agent {i} not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ParameterError(f"edge ({i},{j}) out of range for n={n}")
            canonical.append((i, j) if i < j else (j, i))
        canonical.sort()
        for a, b in zip(canonical, canonical[1:]):
            if a == b:
                raise ParameterError(f"duplicate edge {a}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", tuple(canonical))

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def degrees(self):
        """Neighbor count per agent, as an int64 array."""
        d = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        d.flags.writeable = False
        return d

    @cached_property
    def neighbors(self):
        """Tuple of sorted neighbor tuples, one per agent."""
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def arcs(self):
        """Directed arc arrays (receiver, sender) in canonical order.

        Arc order is receiver-major: agent 0's arcs first (senders
        ascending), then agent 1's, and so on.  Simulation kernels draw
        one communication noise vector per arc in exactly this order.
        """
        rx, tx = [], []
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                rx.append(i)
                tx.append(j)
        rx = np.asarray(rx, dtype=np.int64)
        tx = np.asarray(tx, dtype=np.int64)
        rx.flags.writeable = False
        tx.flags.writeable = False
        return rx, tx


def ring_khop_graph(n, k):
    """Circulant graph where agents are adjacent iff ring distance <= k.

    Regular with degree 2k; for odd n the largest radius k = (n-1)/2
    yields the complete graph.
    """
    n, k = int(n), int(k)
    if n < 3:
        raise ParameterError(f"k-hop ring needs n >= 3, got {n}")
    if not 1 <= k <= (n - 1) // 2:
        raise ParameterError(
            f"hop radius k={k} out of range [1, {(n - 1) // 2}] for n={n}")
    edges = set()
    for i in range(n):
        for m in range(1, k + 1):
            j = (i + m) % n
            edges.add((i, j) if i < j else (j, i))
    return Graph(n, sorted(edges))


def neighbor_closure(g):
    """Graph with every agent additionally linked to its two-hop neighbors.

    On a k-hop ring this doubles the hop radius (capped at the complete
    graph).
    """
    edges = set(g.edges)
    for i, nbrs in enumerate(g.neighbors):
        for j in nbrs:
            for k in g.neighbors[j]:
                if k != i:
                    edges.add((i, k) if i < k else (k, i))
    return Graph(g.n, sorted(edges))


def laplacian(g):
    """Dense Laplacian: degree matrix minus adjacency matrix."""
    lap = np.zeros((g.n, g.n))
    for i, j in g.edges:
        lap[i, j] = -1.0
        lap[j, i] = -1.0
        lap[i, i] += 1.0
        lap[j, j] += 1.0
    return lap


def laplacian_spectrum(g):
    """All Laplacian eigenvalues, ascending.  lambda_1 is 0."""
    try:
        return np.linalg.eigvalsh(laplacian(g))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Laplacian eigensolve failed: {exc}") from exc


def circulant_khop_spectrum(n, k):
    """Closed-form Laplacian spectrum of the k-hop ring, ascending.

    Eigenvalues over frequencies r = 0..n-1 follow from the circulant
    structure; the sum of 2 - 2cos(2 pi m r / n) over m = 1..k collapses
    to a Dirichlet kernel, giving an O(n) evaluation per graph:

        lambda_r = 2k + 1 - sin((2k+1) pi r / n) / sin(pi r / n),  r >= 1.
    """
    n, k = int(n), int(k)
    if n < 3 or not 1 <= k <= (n - 1) // 2:
        raise ParameterError(f"invalid circulant parameters n={n}, k={k}")
    r = np.arange(1, n)
    x = np.pi * r / n
    lam = (2 * k + 1) - np.sin((2 * k + 1) * x) / np.sin(x)
    return np.sort(np.concatenate(([0.0], lam)))


@dataclass(frozen=True)
class ConnectivityReport:
    """Traversal-based connectivity check result."""

    ok: bool
    n_reached: int
    detail: str


def validate_connected(g):
    """Breadth-first connectivity check (no spectral tolerance involved)."""
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.neighbors[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    reached = int(seen.sum())
    if reached == g.n:
        return ConnectivityReport(True, reached, "connected")
    return ConnectivityReport(
        False, reached,
        f"disconnected: only {reached} of {g.n} agents reachable from agent 1")


def read_edge_list(path):
    """Read a plain-text edge list: one "i j" pair per line, 1-based ids.

    Blank lines and '#' comments are allowed.  The agent count is the
    largest index mentioned.
    """
    path = Path(path)
    edges = []
    max_id = 0
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParameterError(
                f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParameterError(
                f"{path}:{lineno}: non-integer agent id in {raw!r}") from None
        if i < 1 or j < 1:
            raise ParameterError(f"{path}:{lineno}: agent ids are 1-based")
        edges.append((i - 1, j - 1))
        max_id = max(max_id, i, j)
    if not edges:
        raise ParameterError(f"{path}: no edges found")
    return Graph(max_id, edges)
