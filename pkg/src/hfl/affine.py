"""Affine actions v -> A(g) v + b(g) of a group on R^d."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .groups import Group

COND_CAP = 1e12


class ActionError(ValueError):
    pass


class AffineAction:
    """Affine action determined by its values on one token of each inverse pair.

    ``generators`` maps tokens to ``(A, b)``.  Data for the inverse token is
    derived as ``A^-1`` and ``-A^-1 b``; passing both members of a pair is an
    error.  For an involutive generator the supplied map must square to the
    identity.
    """

    def __init__(self, group: Group, dim: int, generators: Mapping, C: float = 1.0,
                 sigma: float = 0.0, relator_tol: float = 1e-8):
        if dim < 1:
            raise ActionError("dim must be positive")
        self.group = group
        self.dim = int(dim)
        self.C = float(C)
        self.sigma = float(sigma)
        if self.C <= 0 or self.sigma < 0:
            raise ActionError("need C > 0 and sigma >= 0")
        maps: dict = {}
        for t, (A, b) in generators.items():
            if t not in group.tokens:
                raise ActionError(f"{t!r} is not a generator token")
            A = np.array(A, dtype=float)
            b = np.array(b, dtype=float).reshape(-1)
            if A.shape != (dim, dim) or b.shape != (dim,):
                raise ActionError(f"generator {group.token_name(t)}: dimension mismatch")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ActionError(f"generator {group.token_name(t)}: non-finite entries")
            cond = np.linalg.cond(A)
            if not np.isfinite(cond) or cond > COND_CAP:
                raise ActionError(f"generator {group.token_name(t)}: A is not invertible")
            ti = group.token_inverse(t)
            if ti in maps and ti != t:
                raise ActionError(
                    f"data for {group.token_name(ti)} is derived from {group.token_name(t)}")
            maps[t] = (A, b)
            if ti != t:
                Ai = np.linalg.inv(A)
                maps[ti] = (Ai, -Ai @ b)
        missing = [group.token_name(t) for t in group.tokens if t not in maps]
        if missing:
            raise ActionError(f"missing generator data: {', '.join(missing)}")
        self._maps = maps
        for t in group.tokens:
            if group.is_involutive(t):
                A, b = maps[t]
                if not (np.allclose(A @ A, np.eye(dim), atol=relator_tol)
                        and np.allclose(A @ b + b, 0, atol=relator_tol)):
                    raise ActionError(
                        f"involutive generator {group.token_name(t)} must square to the identity")
        if hasattr(group, "table"):
            self._check_relators(relator_tol)

    def _check_relators(self, tol: float) -> None:
        # rho(word(g)) rho(s) must equal rho(word(gs)) for every g and generator s
        g = self.group
        for x in range(g.order):
            Ax, bx = self.maps(x)
            for t in g.tokens:
                As, bs = self._maps[t]
                Ay, by = self.maps(g.table[x][t])
                if not (np.allclose(Ax @ As, Ay, atol=tol) and np.allclose(Ax @ bs + bx, by, atol=tol)):
                    raise ActionError("generator data does not define an action of the finite group")

    def __repr__(self) -> str:
        return f"AffineAction({self.group!r}, dim={self.dim}, C={self.C}, sigma={self.sigma})"

    def generator_map(self, t):
        return self._maps[t]

    def maps(self, g):
        """``(A(g), b(g))`` composed along a word for ``g``."""
        A = np.eye(self.dim)
        b = np.zeros(self.dim)
        for t in self.group.word_of(g):
            At, bt = self._maps[t]
            b = b + A @ bt
            A = A @ At
        return A, b

    def apply(self, g, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ActionError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        A, b = self.maps(g)
        return A @ v + b

    def linear_part(self, g):
        return self.maps(g)[0]

    def is_isometric(self, tol: float = 1e-10) -> bool:
        eye = np.eye(self.dim)
        return all(np.allclose(A.T @ A, eye, atol=tol) for A, _ in self._maps.values())

    def ball_maps(self, radius: int):
        """Elements of ``ball(radius)`` with stacked linear parts and translations."""
        elements = self.group.ball(radius)
        index = {g: i for i, g in enumerate(elements)}
        As = np.empty((len(elements), self.dim, self.dim))
        bs = np.empty((len(elements), self.dim))
        As[0] = np.eye(self.dim)
        bs[0] = 0.0
        # BFS order: every non-identity element extends an earlier one by a token
        for i, g in enumerate(elements[1:], start=1):
            for t in self.group.tokens:
                p = self.group.step(g, self.group.token_inverse(t))
                j = index.get(p)
                if j is not None and j < i:
                    At, bt = self._maps[t]
                    As[i] = As[j] @ At
                    bs[i] = bs[j] + As[j] @ bt
                    break
        return elements, As, bs


def operator_norm(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class GrowthReport:
    radius: int
    bound_kind: str
    ratio: float
    passed: bool
    witness: object = None

    def as_dict(self, group: Group | None = None) -> dict:
        w = self.witness
        if group is not None and w is not None:
            w = group.format(w)
        return {"radius": self.radius, "bound_kind": self.bound_kind, "ratio": self.ratio,
                "pass": self.passed, "witness": w}


def verify_growth(action: AffineAction, radius: int, bound_kind: str = "conjugacy") -> GrowthReport:
    """Check ``||A(g)|| <= C * len(g)^sigma`` over ``ball(radius)``.

    ``len`` is word length or conjugacy length.  Where the length is 0 the
    bound is read as ``||A(g)|| <= C``.
    """
    if bound_kind not in ("word_length", "conjugacy"):
        raise ValueError(f"unknown bound kind {bound_kind!r}")
    g = action.group
    length = g.word_length if bound_kind == "word_length" else g.conjugacy_length
    elements, As, _ = action.ball_maps(radius)
    worst, witness = 0.0, None
    for x, A in zip(elements, As):
        ell = length(x)
        denom = action.C * (ell ** action.sigma if ell > 0 else 1.0)
        r = operator_norm(A) / denom
        if r > worst:
            worst, witness = r, x
    passed = worst <= 1 + 1e-9
    return GrowthReport(radius, bound_kind, worst, passed, None if passed else witness)


def renorm_estimate(action: AffineAction, v, radius: int) -> float:
    """Lower bound for sup_g ||A(g) v|| using the elements of ``ball(radius)``."""
    v = np.asarray(v, dtype=float)
    _, As, _ = action.ball_maps(radius)
    return float(np.max(np.linalg.norm(As @ v, axis=1)))
