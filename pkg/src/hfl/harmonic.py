"""Equivariant maps, energies, the averaging flow and harmonic/fixed-point solvers.

An equivariant map is stored as its value ``v = f(e)``; equivariance forces
``f(g) = rho(g) v``.  The averaging operator then acts on ``v`` by the affine
map ``T(v) = (v + mean_s rho(s) v) / 2`` and the whole flow is a
``d``-dimensional affine iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affine import AffineAction

HARMONIC_TOL = 1e-8
MONOTONE_SLACK = 1e-10
DEFAULT_CAP = 10_000


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class EquivariantMap:
    action: AffineAction
    base: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).reshape(-1)
        if base.shape != (self.action.dim,):
            raise ValueError(f"base vector must have length {self.action.dim}")
        object.__setattr__(self, "base", base)

    def __call__(self, x):
        return self.action.apply(x, self.base)

    evaluate = __call__

    def is_constant(self, tol: float = 1e-12) -> bool:
        return all(np.linalg.norm(self.action.apply(self.action.group.token_element(t), self.base)
                                  - self.base) <= tol for t in self.action.group.tokens)


def barycenter(points) -> np.ndarray:
    """Weighted mean of a finite list of ``(weight, vector)`` pairs."""
    points = list(points)
    if not points:
        raise ValueError("barycenter of an empty measure")
    w = np.array([p[0] for p in points], dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    V = np.array([np.asarray(p[1], dtype=float).reshape(-1) for p in points])
    return w @ V


def mean_affine(action: AffineAction):
    """``M = mean_s A(s)`` and ``c = mean_s b(s)``."""
    tokens = action.group.tokens
    M = sum(action.generator_map(t)[0] for t in tokens) / len(tokens)
    c = sum(action.generator_map(t)[1] for t in tokens) / len(tokens)
    return M, c


def averaging_step(action: AffineAction, v) -> np.ndarray:
    M, c = mean_affine(action)
    v = np.asarray(v, dtype=float)
    return 0.5 * (v + M @ v + c)


def averaging(f: EquivariantMap) -> EquivariantMap:
    """The map ``Hf``."""
    return EquivariantMap(f.action, averaging_step(f.action, f.base))


def local_energy(f: EquivariantMap, x=None) -> float:
    g = f.action.group
    x = g.identity if x is None else x
    fx = f(x)
    total = 0.0
    for t in g.tokens:
        d = fx - f(g.step(x, t))
        total += float(d @ d)
    return total / (2 * len(g.tokens))


def n_step_energy(f: EquivariantMap, x=None, n: int = 1) -> float:
    """``1/2 sum_w mu^n(w) ||f(x) - f(xw)||^2`` over the exact n-step walk law."""
    g = f.action.group
    x = g.identity if x is None else x
    if n == 0:
        return 0.0
    mu = g.walk_convolution(n)
    elements, As, bs = f.action.ball_maps(n)
    row = {w: i for i, w in enumerate(elements)}
    idx = np.array([row[w] for w in mu.support])
    p = np.array(list(mu.support.values()))
    Ax, bx = f.action.maps(x)
    fx = Ax @ f.base + bx
    fxw = (As[idx] @ f.base + bs[idx]) @ Ax.T + bx
    d = fxw - fx
    return 0.5 * float(p @ np.einsum("ij,ij->i", d, d))


def laplacian(f: EquivariantMap, x=None) -> np.ndarray:
    """``Δf(x) = A(x) (v - T(v))``."""
    g = f.action.group
    x = g.identity if x is None else x
    D = f.base - averaging_step(f.action, f.base)
    return f.action.linear_part(x) @ D


def laplacian_direct(f: EquivariantMap, x=None) -> np.ndarray:
    """``Δf(x)`` by the defining sum over neighbours."""
    g = f.action.group
    x = g.identity if x is None else x
    fx = f(x)
    acc = np.zeros_like(fx)
    for t in g.tokens:
        acc += fx - f(g.step(x, t))
    return acc / (2 * len(g.tokens))


@dataclass
class FlowTrace:
    iterates: list
    delta_e: list = field(default_factory=list)     # ||Δf_i(e)||
    ball_max: list = field(default_factory=list)    # max over ball(R) of ||Δf_i(x)||
    ratios: list = field(default_factory=list)      # contraction factor of step i -> i+1
    violations: int = 0
    worst_excess: float = 0.0
    equality_cases: int = 0
    rigidity_ok: bool = True


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str               # Harmonic | Stable | Unstable | Undecided
    radius: int
    cap: int
    i0: int | None = None
    lam: float | None = None
    witness_iterate: int | None = None
    witness_point: object = None
    note: str = ""

    def as_dict(self, group=None) -> dict:
        w = self.witness_point
        if group is not None and w is not None:
            w = group.format(w)
        return {"kind": self.kind, "radius": self.radius, "cap": self.cap, "i0": self.i0,
                "lambda": self.lam, "witness_iterate": self.witness_iterate,
                "witness_point": w, "note": self.note}


class _BallData:
    """Linear parts over ball(R + 1) and neighbour indices for points of ball(R)."""

    def __init__(self, action: AffineAction, radius: int):
        g = action.group
        elements, As, _ = action.ball_maps(radius + 1)
        index = {x: i for i, x in enumerate(elements)}
        inner = [x for x in elements if g.word_length(x) <= radius]
        self.inner = inner
        self.As = As
        self.inner_idx = np.array([index[x] for x in inner])
        self.nbrs = np.array([[index[x]] + [index[g.step(x, t)] for t in g.tokens] for x in inner])

    def norms(self, D):
        return np.linalg.norm(self.As @ D, axis=1)


def run_flow(f: EquivariantMap, radius: int = 4, cap: int = DEFAULT_CAP,
             tol: float = HARMONIC_TOL, slack: float = MONOTONE_SLACK,
             equality_tol: float = 1e-12):
    """Iterate ``f_{i+1} = H f_i`` and classify the trajectory on ``ball(radius)``.

    At each step the bound ``||Δ f_{i+1}(x)|| <= max_{x' in x(S+e)} ||Δ f_i(x')||``
    is checked for every ``x`` in the ball; the slack is ``slack * max(1, rhs)``.
    Returns ``(FlowTrace, StabilityVerdict)``.
    """
    action = f.action
    M, c = mean_affine(action)
    ball = _BallData(action, radius)
    v = f.base.copy()
    trace = FlowTrace(iterates=[v.copy()])
    D = v - (0.5 * (v + M @ v + c))
    norms = ball.norms(D)
    harmonic_at = None
    note = ""
    for i in range(cap + 1):
        trace.delta_e.append(float(np.linalg.norm(D)))
        trace.ball_max.append(float(norms[ball.inner_idx].max()))
        if trace.delta_e[-1] <= tol:
            harmonic_at = i
            break
        if i == cap:
            break
        v_next = 0.5 * (v + M @ v + c)
        D_next = v_next - 0.5 * (v_next + M @ v_next + c)
        if not (np.all(np.isfinite(v_next)) and np.all(np.isfinite(D_next))):
            note = f"iterates left the floating-point range after {i} steps"
            break
        norms_next = ball.norms(D_next)
        lhs = norms_next[ball.inner_idx]
        rhs = norms[ball.nbrs].max(axis=1)
        excess = lhs - rhs
        bad = excess > slack * np.maximum(1.0, rhs)
        if bad.any():
            trace.violations += int(bad.sum())
        trace.worst_excess = max(trace.worst_excess, float(excess.max()))
        eq = np.abs(excess) <= equality_tol * np.maximum(1.0, rhs)
        eq &= rhs > 0
        if eq.any():
            trace.equality_cases += int(eq.sum())
            inner_vals = (ball.As[ball.inner_idx] @ D)
            if not np.allclose(inner_vals, inner_vals[0], atol=1e-9 * max(1.0, rhs.max())):
                trace.rigidity_ok = False
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / rhs, 0.0)
        trace.ratios.append(float(r.max()))
        v, D, norms = v_next, D_next, norms_next
        trace.iterates.append(v.copy())
    verdict = _classify(trace, radius, cap, harmonic_at, note, ball)
    return trace, verdict


def _classify(trace: FlowTrace, radius, cap, harmonic_at, note, ball) -> StabilityVerdict:
    if harmonic_at is not None:
        return StabilityVerdict("Harmonic", radius, cap, i0=harmonic_at, note=note)
    ratios = trace.ratios
    k = len(ratios)
    if k == 0:
        return StabilityVerdict("Undecided", radius, cap, note=note or "no flow steps taken")
    i0 = k
    while i0 > 0 and ratios[i0 - 1] < 1.0:
        i0 -= 1
    # contraction must hold on at least the second half of the observed steps
    if k - i0 >= max(1, (k + 1) // 2):
        lam = max(ratios[i0:])
        return StabilityVerdict("Stable", radius, cap, i0=i0, lam=lam, note=note)
    tail = ratios[k // 2:]
    if tail and min(tail) >= 1.0:
        j = k - 1
        return StabilityVerdict("Unstable", radius, cap, witness_iterate=j,
                                witness_point=ball.inner[0], note=note)
    return StabilityVerdict("Undecided", radius, cap, note=note)


@dataclass(frozen=True)
class HarmonicSolution:
    kind: str                   # unique | family | none
    particular: np.ndarray | None
    kernel: np.ndarray          # columns span ker(I - M)
    residual: float


def solve_harmonic(action: AffineAction, rtol: float = 1e-10, residual_tol: float = 1e-8) -> HarmonicSolution:
    """Solve ``(I - M) v = c``, the equation ``T(v) = v``."""
    M, c = mean_affine(action)
    K = np.eye(action.dim) - M
    U, s, Vt = np.linalg.svd(K)
    rank = int(np.sum(s > rtol * max(1.0, s[0] if s.size else 0.0)))
    v = np.linalg.lstsq(K, c, rcond=None)[0]
    residual = float(np.linalg.norm(K @ v - c))
    kernel = Vt[rank:].T
    if residual > residual_tol:
        return HarmonicSolution("none", None, kernel, residual)
    return HarmonicSolution("unique" if rank == action.dim else "family", v, kernel, residual)


def find_fixed_point(action: AffineAction, tol: float = 1e-8):
    """A common fixed point of the generators, or ``None``."""
    g = action.group
    rows, rhs = [], []
    for t in g.tokens:
        A, b = action.generator_map(t)
        rows.append(A - np.eye(action.dim))
        rhs.append(-b)
    K = np.vstack(rows)
    r = np.concatenate(rhs)
    v = np.linalg.lstsq(K, r, rcond=None)[0]
    if np.max(np.abs(K @ v - r)) <= tol:
        return v
    return None


def min_energy_vector(action: AffineAction, x=None):
    """Base vector minimizing the local energy at ``x``, and its harmonic residual.

    The energy is the quadratic ``sum_s ||A(x)((I - A(s)) v - b(s))||^2 / (2|S|)``;
    the minimum-norm minimizer is returned when the Hessian is singular.
    """
    g = action.group
    x = g.identity if x is None else x
    Ax = action.linear_part(x)
    rows, rhs = [], []
    for t in g.tokens:
        A, b = action.generator_map(t)
        rows.append(Ax @ (np.eye(action.dim) - A))
        rhs.append(Ax @ b)
    v = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)[0]
    residual = float(np.linalg.norm(v - averaging_step(action, v)))
    return v, residual


def delta(action: AffineAction, v) -> float:
    """Largest displacement ``max_s ||rho(s) v - v||``."""
    v = np.asarray(v, dtype=float)
    best = 0.0
    for t in action.group.tokens:
        A, b = action.generator_map(t)
        best = max(best, float(np.linalg.norm(A @ v + b - v)))
    return best


class SearchCapReached(FlowError):
    pass


def near_critical_search(action: AffineAction, v0, j: float, cap: int = 60,
                         samples: int = 64, seed: int = 0):
    """Move while some ``w`` with ``||w - v|| <= j δ(v)`` has ``δ(w) < δ(v)/2``.

    Candidates are the least-displacement point projected into the allowed
    ball, points on the segment towards it, and seeded random points of the
    ball.  Returns ``(v, path)`` where ``path`` lists the accepted points.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    rng = np.random.default_rng(seed)
    v = np.asarray(v0, dtype=float).copy()
    path = [v.copy()]
    g = action.group
    K = np.vstack([action.generator_map(t)[0] - np.eye(action.dim) for t in g.tokens])
    r = np.concatenate([-action.generator_map(t)[1] for t in g.tokens])
    target = np.linalg.lstsq(K, r, rcond=None)[0]
    for _ in range(cap):
        dv = delta(action, v)
        if dv == 0.0:
            return v, path
        radius = j * dv
        w = _best_candidate(action, v, dv, radius, target, rng, samples)
        if w is None:
            return v, path
        v = w
        path.append(v.copy())
    if delta(action, v) == 0.0:
        return v, path
    raise SearchCapReached(f"displacement still halving after {cap} moves (delta={delta(action, v):.3e})")


def _best_candidate(action, v, dv, radius, target, rng, samples):
    step = target - v
    dist = float(np.linalg.norm(step))
    cands = []
    if dist > 0:
        direction = step / dist
        for frac in (1.0, 0.5, 0.25):
            cands.append(v + direction * min(dist, radius) * frac)
    d = action.dim
    for _ in range(samples):
        u = rng.standard_normal(d)
        u *= radius * rng.random() ** (1.0 / d) / max(np.linalg.norm(u), 1e-300)
        cands.append(v + u)
    for w in cands:
        if delta(action, w) < dv / 2:
            return w
    return None
