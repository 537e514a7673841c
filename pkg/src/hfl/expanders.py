"""Finite graphs: random regular generation, spectral gap, girth, walk energies."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg


class GraphError(ValueError):
    pass


class LabelledGraph:
    """Undirected multigraph without self-loops on vertices ``0..V-1``."""

    def __init__(self, n_vertices: int, edges: Iterable[Sequence[int]]):
        self.V = int(n_vertices)
        es = []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < self.V and 0 <= v < self.V):
                raise GraphError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            es.append((u, v))
        self.edges = tuple(es)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.V)]
        for k, (u, v) in enumerate(es):
            adj[u].append((v, k))
            adj[v].append((u, k))
        self.adj = tuple(tuple(a) for a in adj)
        self.degrees = np.array([len(a) for a in adj])

    def __repr__(self) -> str:
        return f"LabelledGraph(V={self.V}, E={len(self.edges)})"

    @property
    def E(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> list[int]:
        return [v for v, _ in self.adj[u]]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.V, self.V))
        for u, v in self.edges:
            A[u, v] += 1
            A[v, u] += 1
        return A

    def transition(self) -> np.ndarray:
        if np.any(self.degrees == 0):
            raise GraphError("isolated vertex")
        return self.adjacency() / self.degrees[:, None]

    def stationary(self) -> np.ndarray:
        return self.degrees / (2.0 * self.E)

    def bfs(self, source: int) -> np.ndarray:
        dist = np.full(self.V, -1)
        dist[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for v, _ in self.adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    q.append(v)
        return dist

    def is_connected(self) -> bool:
        return self.V > 0 and bool(np.all(self.bfs(0) >= 0))

    def girth(self) -> float:
        """Length of a shortest cycle; ``inf`` for a forest."""
        best = float("inf")
        for s in range(self.V):
            dist = [-1] * self.V
            via = [-1] * self.V
            dist[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                if 2 * dist[u] + 1 >= best:
                    break
                for v, k in self.adj[u]:
                    if k == via[u]:
                        continue
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        via[v] = k
                        q.append(v)
                    else:
                        best = min(best, dist[u] + dist[v] + 1)
        return best

    def diameter(self) -> int:
        d = 0
        for s in range(self.V):
            dist = self.bfs(s)
            if np.any(dist < 0):
                raise GraphError("graph is disconnected")
            d = max(d, int(dist.max()))
        return d

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges)

    @classmethod
    def from_edge_list(cls, text: str, n_vertices: int | None = None) -> "LabelledGraph":
        edges = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"line {lineno}: expected 'u v', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphError(f"line {lineno}: vertices must be integers") from None
        V = n_vertices if n_vertices is not None else 1 + max((max(e) for e in edges), default=-1)
        return cls(V, edges)


def cycle_graph(n: int) -> LabelledGraph:
    return LabelledGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> LabelledGraph:
    return LabelledGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def petersen_graph() -> LabelledGraph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return LabelledGraph(10, outer + spokes + inner)


def projective_plane_incidence(q: int = 3) -> LabelledGraph:
    """Point-line incidence graph of PG(2, q) for prime ``q``: (q+1)-regular, girth 6."""
    pts = []
    for a in range(q):
        for b in range(q):
            pts.append((a, b, 1))
    for a in range(q):
        pts.append((a, 1, 0))
    pts.append((1, 0, 0))
    n = len(pts)
    edges = [(i, n + j) for i, p in enumerate(pts) for j, l in enumerate(pts)
             if (p[0] * l[0] + p[1] * l[1] + p[2] * l[2]) % q == 0]
    return LabelledGraph(2 * n, edges)


def random_regular(V: int, k: int, seed: int, max_tries: int = 10_000,
                   min_girth: int | None = None, max_switches: int = 200_000) -> LabelledGraph:
    """Simple ``k``-regular graph from the pairing model, rejecting loops and multi-edges.

    With ``min_girth`` the sample is then improved by random double-edge
    switches that remove short cycles without creating new ones.
    """
    if k < 3:
        raise GraphError("need k >= 3")
    if (V * k) % 2 or V <= k:
        raise GraphError(f"no simple {k}-regular graph on {V} vertices")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(V), k)
    for _ in range(max_tries):
        perm = rng.permutation(points).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        pairs = {tuple(sorted(p)) for p in perm.tolist()}
        if len(pairs) != len(perm):
            continue
        g = LabelledGraph(V, sorted(pairs))
        if not g.is_connected():
            continue
        if min_girth is not None:
            g = _raise_girth(g, min_girth, rng, max_switches)
        return g
    raise GraphError(f"pairing model rejected {max_tries} times")


def _short_cycle_edge(adj: list[set], V: int, girth: int):
    """An edge lying on a cycle shorter than ``girth``, or None."""
    for s in range(V):
        dist = {s: 0}
        parent = {s: -1}
        q = deque([s])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= girth:
                break
            for v in adj[u]:
                if v == parent[u]:
                    continue
                if v not in dist:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    q.append(v)
                elif dist[u] + dist[v] + 1 < girth:
                    return (u, v)
    return None


def _raise_girth(g: LabelledGraph, girth: int, rng, max_switches: int) -> LabelledGraph:
    V = g.V
    adj = [set(g.neighbors(u)) for u in range(V)]
    edges = [tuple(e) for e in g.edges]
    for _ in range(max_switches):
        bad = _short_cycle_edge(adj, V, girth)
        if bad is None:
            out = LabelledGraph(V, sorted(tuple(sorted(e)) for e in edges))
            if out.is_connected():
                return out
            bad = edges[rng.integers(len(edges))]
        u, v = bad
        x, y = edges[rng.integers(len(edges))]
        if rng.random() < 0.5:
            x, y = y, x
        if len({u, v, x, y}) < 4 or y in adj[u] or x in adj[v]:
            continue
        # switch uv, xy -> uy, vx; only cycles through these four vertices change
        touched = (u, v, x, y)
        before = sum(_cycles_through(adj, s, girth) for s in touched)
        _swap(adj, ((u, v), (x, y)), ((u, y), (v, x)))
        after = sum(_cycles_through(adj, s, girth) for s in touched)
        if after <= before:
            edges = [e for e in edges if set(e) not in ({u, v}, {x, y})] + [(u, y), (v, x)]
        else:
            _swap(adj, ((u, y), (v, x)), ((u, v), (x, y)))
    raise GraphError(f"could not reach girth {girth} within {max_switches} switches")


def _swap(adj, remove, add) -> None:
    for a, b in remove:
        adj[a].discard(b)
        adj[b].discard(a)
    for a, b in add:
        adj[a].add(b)
        adj[b].add(a)


def _cycles_through(adj, s, girth) -> int:
    """Count of non-tree edges closing a cycle shorter than ``girth`` in the BFS from ``s``."""
    dist = {s: 0}
    parent = {s: -1}
    q = deque([s])
    c = 0
    while q:
        u = q.popleft()
        if 2 * dist[u] + 1 >= girth:
            break
        for v in adj[u]:
            if v == parent[u]:
                continue
            if v not in dist:
                dist[v] = dist[u] + 1
                parent[v] = u
                q.append(v)
            elif dist[u] + dist[v] + 1 < girth:
                c += 1
    return c


@dataclass(frozen=True)
class ExpanderStats:
    lambda1: float
    girth: float
    diameter: int

    def as_dict(self) -> dict:
        return {"lambda1": self.lambda1,
                "girth": None if self.girth == float("inf") else int(self.girth),
                "diameter": self.diameter}


def spectral_gap(g: LabelledGraph) -> float:
    """Second smallest eigenvalue of ``I - D^-1/2 A D^-1/2``."""
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    if g.V == 1:
        raise GraphError("spectral gap needs at least two vertices")
    s = 1.0 / np.sqrt(g.degrees)
    N = np.eye(g.V) - s[:, None] * g.adjacency() * s[None, :]
    return float(scipy.linalg.eigh(N, eigvals_only=True, subset_by_index=[1, 1])[0])


def stats(g: LabelledGraph) -> ExpanderStats:
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    return ExpanderStats(spectral_gap(g), g.girth(), g.diameter())


def graph_walk(g: LabelledGraph, u: int, n: int) -> np.ndarray:
    P = g.transition()
    p = np.zeros(g.V)
    p[u] = 1.0
    for _ in range(n):
        p = p @ P
    return p


def walk_matrix(g: LabelledGraph, n: int) -> np.ndarray:
    return np.linalg.matrix_power(g.transition(), n)


def graph_energy(g: LabelledGraph, phi, n: int) -> float:
    """``1/2 sum_u nu(u) sum_v ||phi(u) - phi(v)||^2 P^n(u, v)``."""
    if n == 0:
        return 0.0
    return energy_from_walk(walk_matrix(g, n), g.stationary(), phi)


def energy_from_walk(Pn: np.ndarray, nu: np.ndarray, phi) -> float:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    diff = phi[:, None, :] - phi[None, :, :]
    D2 = np.einsum("uvk,uvk->uv", diff, diff)
    return 0.5 * float(nu @ np.sum(D2 * Pn, axis=1))


def check_energy_inequality(g: LabelledGraph, phi, n: int, lambda1: float | None = None,
                            tol: float = 1e-10) -> dict:
    """Compare ``E_n(phi)`` with ``(2 / lambda1) E_1(phi)``."""
    lam = spectral_gap(g) if lambda1 is None else lambda1
    lhs = graph_energy(g, phi, n)
    rhs = 2.0 / lam * graph_energy(g, phi, 1)
    scale = max(1.0, abs(rhs))
    return {"n": n, "lhs": lhs, "rhs": rhs, "lambda1": lam, "pass": lhs <= rhs + tol * scale}
