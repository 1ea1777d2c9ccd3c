"""Communication graphs, Metropolis mixing matrices and their spectral gap."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ParameterError, PreconditionError
from .rng import STREAM_TOPOLOGY, make_rng

SIGMA2_RTOL = 1e-10
SIGMA2_MAX_ITER = 100_000


@dataclass(frozen=True)
class Topology:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` holds normalized pairs ``(i, j)`` with ``i < j``, sorted.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        seen = set()
        normalized = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ParameterError(f"edge ({i}, {j}) out of range for n={self.n}")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise ParameterError(f"duplicate edge {e}")
            seen.add(e)
            normalized.append(e)
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @cached_property
    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for nb in adj:
            nb.sort()
        return adj

    @property
    def degrees(self) -> list[int]:
        return [len(nb) for nb in self.neighbors]

    def to_edgelist(self) -> str:
        lines = [str(self.n)] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> Topology:
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 1:
            raise ParameterError("edge list must start with a line holding n")
        n = int(rows[0][0])
        edges = []
        for k, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise ParameterError(f"line {k}: expected 'i j'")
            edges.append((int(row[0]), int(row[1])))
        return cls(n, tuple(edges))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edgelist())

    @classmethod
    def load(cls, path: str | Path) -> Topology:
        return cls.from_edgelist(Path(path).read_text())


def is_connected(t: Topology) -> bool:
    """Breadth-first search from node 0."""
    visited = [False] * t.n
    visited[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in t.neighbors[u]:
            if not visited[v]:
                visited[v] = True
                count += 1
                queue.append(v)
    return count == t.n


def gen_named(kind: str, n: int) -> Topology:
    """Path, cycle, complete or star graph (star centered at node 0)."""
    minimum = 3 if kind == "cycle" else 2
    if kind not in ("path", "cycle", "complete", "star"):
        raise ParameterError(f"unknown graph family {kind!r}")
    if n < minimum:
        raise ParameterError(f"{kind} graph needs n >= {minimum}, got {n}")
    if kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        edges = [(0, j) for j in range(1, n)]
    return Topology(n, tuple(edges))


def _watts_strogatz(n: int, k: int, p_rewire: float, rng: np.random.Generator) -> Topology:
    adj = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    # Rewire each clockwise lattice edge (u, u+j) once, ring by ring.
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= p_rewire:
                continue
            if v not in adj[u] or len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return Topology(n, tuple(edges))


def gen_small_world(n: int, k: int, p_rewire: float, seed: int) -> Topology:
    """Connected Watts-Strogatz graph with exactly ``n*k/2`` edges.

    Starts from a ring lattice where every node links to its ``k`` nearest
    neighbours, then rewires each clockwise lattice edge with probability
    ``p_rewire``.  A rewired endpoint is redrawn until it is neither a
    self-loop nor a duplicate.  If the result is disconnected the whole
    graph is regenerated with ``seed + 1``, ``seed + 2``, ...
    """
    if k < 2 or k % 2 or k >= n:
        raise ParameterError(f"need even k with 2 <= k < n, got n={n}, k={k}")
    if not 0.0 <= p_rewire <= 1.0:
        raise ParameterError(f"p_rewire must lie in [0, 1], got {p_rewire}")
    s = seed
    while True:
        t = _watts_strogatz(n, k, p_rewire, make_rng(s, STREAM_TOPOLOGY))
        if is_connected(t):
            return t
        s += 1


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Doubly stochastic mixing matrix ``P`` (dense, row-major)."""

    w: np.ndarray
    topology: Topology | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        """CSR view holding only edge and self weights."""
        return sp.csr_matrix(self.w)

    def mix(self, s: np.ndarray) -> np.ndarray:
        """Row ``i`` of the result is ``sum_j p_ij s_j`` over ``j`` in ``N_i`` and ``i``."""
        return np.asarray(self.sparse @ s)

    @cached_property
    def sigma2(self) -> float:
        return sigma2(self)


def metropolis_weights(t: Topology) -> WeightMatrix:
    """Metropolis constant edge weights ``1 / (1 + max(deg_i, deg_j))``."""
    if not is_connected(t):
        raise PreconditionError("Metropolis weights need a connected topology")
    deg = t.degrees
    w = np.zeros((t.n, t.n))
    for i, j in t.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(t.n):
        w[i, i] = 1.0 - sum(w[i, j] for j in t.neighbors[i])
    return WeightMatrix(w, t)


def sigma2(p: WeightMatrix | np.ndarray) -> float:
    """Second-largest singular value of a doubly stochastic matrix.

    The top singular pair of ``P`` is ``(1, 1/sqrt(n))``, so power iteration
    runs on ``A^T A`` with ``A = P - 11^T/n``.  Convergence is declared when
    the eigen-residual ``||A^T A v - rho v||`` drops below ``1e-10 * rho``,
    which pins ``rho`` to an eigenvalue within that relative tolerance.
    """
    w = p.w if isinstance(p, WeightMatrix) else np.asarray(p, dtype=float)
    n = w.shape[0]
    if n == 1:
        return 0.0
    a = w - 1.0 / n
    # Fixed start vector with a component on every eigvector orthogonal to 1.
    v = make_rng(0, 0).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    for _ in range(SIGMA2_MAX_ITER):
        u = a.T @ (a @ v)
        norm_u = np.linalg.norm(u)
        if norm_u <= 1e-14:
            return 0.0
        rho = float(v @ u)
        if np.linalg.norm(u - rho * v) <= SIGMA2_RTOL * rho:
            return float(np.sqrt(max(rho, 0.0)))
        v = u / norm_u
    raise NumericalError(f"power iteration did not converge in {SIGMA2_MAX_ITER} steps")
