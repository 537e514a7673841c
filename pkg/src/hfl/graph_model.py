"""Random labellings of graphs by free generators and the walks they push forward.

A labelling assigns to every directed edge a token of ``F_m`` with the
reversed edge carrying the inverse token.  Below half the girth a vertex
ball of the graph is a tree, so each labelling maps it into the Cayley tree
of ``F_m`` and graph random walks can be pushed forward to the free group.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .affine import verify_growth
from .expanders import LabelledGraph, spectral_gap
from .groups import FreeGroup, WalkMeasure, cyclically_reduce, reduce_word
from .harmonic import EquivariantMap


class GirthBoundError(ValueError):
    pass


@dataclass(frozen=True)
class SLabelling:
    graph: LabelledGraph
    m: int
    labels: tuple  # token on edge k oriented as graph.edges[k]

    def __post_init__(self):
        if len(self.labels) != self.graph.E:
            raise ValueError("one label per edge required")
        for t in self.labels:
            if t == 0 or abs(t) > self.m:
                raise ValueError(f"label {t} is not a token of F_{self.m}")

    def label(self, u: int, k: int) -> int:
        """Token read when leaving ``u`` along edge ``k``."""
        a, _ = self.graph.edges[k]
        return self.labels[k] if a == u else -self.labels[k]

    def path_label(self, vertices) -> tuple:
        """Reduced label of a vertex path; parallel edges resolve to the lowest edge id."""
        word = []
        for a, b in zip(vertices, vertices[1:]):
            ks = [k for w, k in self.graph.adj[a] if w == b]
            if not ks:
                raise ValueError(f"({a}, {b}) is not an edge")
            word.append(self.label(a, min(ks)))
        return reduce_word(word)


def sample_labelling(graph: LabelledGraph, m: int, seed) -> SLabelling:
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 2 * m, size=graph.E)
    tokens = np.array([t for i in range(1, m + 1) for t in (i, -i)])
    return SLabelling(graph, m, tuple(int(t) for t in tokens[idx]))


def _derived_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def _tree(graph: LabelledGraph, u: int, depth: int):
    """BFS tree from ``u`` to ``depth``: vertex -> (parent vertex, edge id)."""
    parent = {u: (None, None)}
    dist = {u: 0}
    q = deque([u])
    while q:
        a = q.popleft()
        if dist[a] == depth:
            continue
        for b, k in graph.adj[a]:
            if b not in dist:
                dist[b] = dist[a] + 1
                parent[b] = (a, k)
                q.append(b)
    return parent, dist


def _tree_words(alpha: SLabelling, parent, order) -> dict:
    words = {}
    for v in order:
        p, k = parent[v]
        words[v] = () if p is None else reduce_word(words[p] + (alpha.label(p, k),))
    return words


def _check_girth(n: int, girth: float) -> None:
    if not 2 * n < girth:
        raise GirthBoundError(f"n = {n} requires girth > {2 * n}, graph has girth {girth}")


def beta(alpha: SLabelling, u: int, x, v: int, girth: float | None = None) -> tuple:
    """Image of ``v`` under the morphism sending ``u`` to ``x``: ``x`` times the geodesic label."""
    g = alpha.graph
    girth = g.girth() if girth is None else girth
    dist = g.bfs(u)
    if dist[v] < 0 or not 2 * dist[v] < girth:
        raise GirthBoundError(
            f"vertex {v} is at distance {dist[v]} from {u}; defined only below girth/2 = {girth / 2}")
    parent, d = _tree(g, u, int(dist[v]))
    path = [v]
    while parent[path[-1]][0] is not None:
        path.append(parent[path[-1]][0])
    return reduce_word(tuple(x) + alpha.path_label(path[::-1]))


class WalkSkeleton:
    """Labelling-independent data for pushing forward n-step walks of a graph."""

    def __init__(self, graph: LabelledGraph, n: int, girth: float | None = None):
        self.graph = graph
        self.n = n
        self.girth = graph.girth() if girth is None else girth
        _check_girth(n, self.girth)
        P = graph.transition()
        self.Pn = np.linalg.matrix_power(P, n)
        self.nu = graph.stationary()
        self.trees = []
        for u in range(graph.V):
            parent, dist = _tree(graph, u, n)
            order = sorted(parent, key=lambda v: dist[v])
            targets = [(v, float(self.Pn[u, v])) for v in order if self.Pn[u, v] > 0]
            self.trees.append((parent, order, targets))

    def measure(self, alpha: SLabelling, x=()) -> dict:
        out: dict = {}
        x = tuple(x)
        for u, (parent, order, targets) in enumerate(self.trees):
            words = _tree_words(alpha, parent, order)
            w_u = self.nu[u]
            for v, p in targets:
                key = reduce_word(x + words[v])
                out[key] = out.get(key, 0.0) + w_u * p
        return out


@dataclass(frozen=True)
class PushforwardWalk:
    measure: WalkMeasure
    n: int
    girth: float

    @property
    def support(self) -> dict:
        return self.measure.support


def pushforward_walk(alpha: SLabelling, x=(), n: int = 1, skeleton: WalkSkeleton | None = None
                     ) -> PushforwardWalk:
    sk = skeleton if skeleton is not None and skeleton.n == n else WalkSkeleton(alpha.graph, n)
    return PushforwardWalk(WalkMeasure(sk.measure(alpha, x), tuple(x)), n, sk.girth)


def random_walk_path(graph: LabelledGraph, u: int, n: int, rng) -> list:
    path = [u]
    for _ in range(n):
        nb = graph.adj[path[-1]]
        path.append(nb[rng.integers(len(nb))][0])
    return path


def measure_energy(f: EquivariantMap, x, measure: dict) -> float:
    """``1/2 sum ||f(x) - f(x')||^2 mu(x')`` for a measure on ``F_m``."""
    fx = f(x)
    total = 0.0
    for y, p in measure.items():
        d = fx - f(y)
        total += p * float(d @ d)
    return 0.5 * total


def transplanted_energy(f: EquivariantMap, alpha: SLabelling, x=(), n: int = 1,
                        skeleton: WalkSkeleton | None = None) -> float:
    return measure_energy(f, tuple(x), pushforward_walk(alpha, x, n, skeleton).support)


def check_transplant_inequality(f: EquivariantMap, alpha: SLabelling, x=(), n: int = 1,
                                growth_radius: int = 4, tol: float = 1e-9) -> dict:
    """Compare the pushed-forward n-step energy with the growth-dependent bound."""
    action = f.action
    if not isinstance(action.group, FreeGroup) or action.group.m != alpha.m:
        raise ValueError("the action must be on the free group of the labelling")
    growth = verify_growth(action, growth_radius, "word_length")
    if not growth.passed:
        raise ValueError(f"growth bound fails at radius {growth_radius} "
                         f"(ratio {growth.ratio:.6g})")
    g = alpha.graph
    girth = g.girth()
    x = tuple(x)
    lam = spectral_gap(g)
    D = g.diameter()
    lx = len(x)
    C, s = action.C, action.sigma
    factor = 2 * C**12 * D ** (4 * s) * (lx ** (8 * s) if lx > 0 else 1.0) / lam
    lhs = transplanted_energy(f, alpha, x, n, WalkSkeleton(g, n, girth))
    base = transplanted_energy(f, alpha, x, 1, WalkSkeleton(g, 1, girth))
    rhs = factor * base
    return {"n": n, "lhs": lhs, "rhs": rhs, "base_energy": base, "factor": factor,
            "lambda1": lam, "diameter": D, "growth_radius": growth_radius,
            "pass": lhs <= rhs + tol * max(1.0, abs(rhs))}


def expected_pushforward(graph: LabelledGraph, m: int, n: int, samples: int, seed: int,
                         jobs: int = 1, skeleton: WalkSkeleton | None = None):
    """Monte-Carlo mean of the pushforward walk at ``e`` and the per-sample measures."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sk = skeleton if skeleton is not None else WalkSkeleton(graph, n)

    def one(i):
        return sk.measure(sample_labelling(graph, m, _derived_seed(seed, i)))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            measures = list(ex.map(one, range(samples)))
    else:
        measures = [one(i) for i in range(samples)]
    mean: dict = {}
    for mu in measures:
        for k, p in mu.items():
            mean[k] = mean.get(k, 0.0) + p
    keys = sorted(mean, key=lambda w: (len(w), w))
    return {k: mean[k] / samples for k in keys}, measures


@dataclass(frozen=True)
class MixtureFit:
    n: int
    weights: np.ndarray
    residual: float     # total variation distance of the fit
    tail_mass: float    # sum of weights with sqrt(n) < l <= n
    samples: int

    def as_dict(self) -> dict:
        return {"n": self.n, "weights": [float(w) for w in self.weights],
                "residual": self.residual, "tail_mass": self.tail_mass, "samples": self.samples}


def simplex_nnls(A: np.ndarray, y: np.ndarray, penalty: float = 1e6) -> np.ndarray:
    """Least squares ``A w ~ y`` over the probability simplex."""
    k = A.shape[1]
    Aa = np.vstack([A, penalty * np.ones((1, k))])
    ya = np.concatenate([y, [penalty]])
    w, _ = nnls(Aa, ya)
    s = w.sum()
    return w / s if s > 0 else np.full(k, 1.0 / k)


def fit_mixture(graph: LabelledGraph, m: int, n: int, samples: int, seed: int,
                jobs: int = 1) -> MixtureFit:
    """Fit the expected pushforward walk by convolution powers of the free-group walk."""
    sk = WalkSkeleton(graph, n)
    mean, _ = expected_pushforward(graph, m, n, samples, seed, jobs, sk)
    F = FreeGroup(m)
    powers = [F.walk_convolution(l).support for l in range(n + 1)]
    keys = sorted(set(mean).union(*powers), key=lambda w: (len(w), w))
    A = np.array([[mu.get(k, 0.0) for mu in powers] for k in keys])
    y = np.array([mean.get(k, 0.0) for k in keys])
    w = simplex_nnls(A, y)
    residual = 0.5 * float(np.abs(A @ w - y).sum())
    tail = float(sum(w[l] for l in range(n + 1) if l > math.sqrt(n)))
    return MixtureFit(n, w, residual, tail, samples)


def concentration_experiment(graph: LabelledGraph, m: int, n: int, samples: int, seed: int,
                             jobs: int = 1) -> dict:
    """Fraction of labellings whose walks stay within factor 2 of the expectation.

    Checked per labelling: one-step masses at most twice the expected one-step
    masses (on the labelling's support) and n-step masses at least half the
    expected n-step masses (on the expectation's support).
    """
    sk1 = WalkSkeleton(graph, 1)
    skn = sk1 if n == 1 else WalkSkeleton(graph, n, sk1.girth)
    mean1, m1 = expected_pushforward(graph, m, 1, samples, seed, jobs, sk1)
    meann, mn = expected_pushforward(graph, m, n, samples, seed, jobs, skn)
    good = 0
    worst_upper, worst_lower = 0.0, math.inf
    for a, b in zip(m1, mn):
        up = max(p / mean1[k] for k, p in a.items())
        lo = min(b.get(k, 0.0) / q for k, q in meann.items())
        worst_upper = max(worst_upper, up)
        worst_lower = min(worst_lower, lo)
        if up <= 2.0 and lo >= 0.5:
            good += 1
    return {"n": n, "m": m, "samples": samples, "V": graph.V, "fraction": good / samples,
            "worst_upper_ratio": worst_upper, "worst_lower_ratio": worst_lower}


def extract_relators(alpha: SLabelling, root: int = 0) -> list:
    """Cyclically reduced labels of the fundamental cycles of a BFS spanning tree."""
    g = alpha.graph
    if not g.is_connected():
        raise ValueError("graph is disconnected")
    parent, dist = _tree(g, root, g.V)
    order = sorted(parent, key=lambda v: dist[v])
    words = _tree_words(alpha, parent, order)
    tree_edges = {k for p, k in parent.values() if k is not None}
    rels = []
    for k, (u, v) in enumerate(g.edges):
        if k in tree_edges:
            continue
        back = tuple(-t for t in reversed(words[v]))
        rels.append(cyclically_reduce(words[u] + (alpha.label(u, k),) + back))
    return rels


def emit_presentation(alpha: SLabelling, root: int = 0) -> dict:
    F = FreeGroup(alpha.m)
    return {"type": "free", "m": alpha.m,
            "generators": [F.token_name(i) for i in range(1, alpha.m + 1)],
            "relators": [F.format(r) for r in extract_relators(alpha, root)]}
