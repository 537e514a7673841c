"""Named actions used by the tests, the CLI and the acceptance battery."""

from __future__ import annotations

import numpy as np

from .affine import AffineAction
from .groups import FreeGroup

QUARTER_TURN = np.array([[0.0, -1.0], [1.0, 0.0]])


def z_translation() -> AffineAction:
    """Z acting on R by unit translation."""
    return AffineAction(FreeGroup(1), 1, {1: ([[1.0]], [1.0])}, C=1.0, sigma=0.0)


def z_scaling(factor: float = 2.0, shift: float = 0.0) -> AffineAction:
    """Z acting on R by ``v -> factor * v + shift``."""
    C = max(factor, 1 / factor)
    return AffineAction(FreeGroup(1), 1, {1: ([[factor]], [shift])}, C=C, sigma=1.0)


def quarter_turn() -> AffineAction:
    """Z acting on R^2 by rotation through a right angle followed by (1, 0)."""
    return AffineAction(FreeGroup(1), 2, {1: (QUARTER_TURN, [1.0, 0.0])}, C=1.0, sigma=0.0)


def non_isometric_fixture() -> AffineAction:
    """F_2 on R^2 with no fixed point whose energy minimizer is not harmonic."""
    return AffineAction(FreeGroup(2), 2, {1: (np.diag([2.0, 0.5]), [1.0, 0.0]),
                                          2: (QUARTER_TURN, [0.0, 1.0])}, C=4.0, sigma=1.0)


FIXTURES = {
    "z-translation": z_translation,
    "z-scaling": z_scaling,
    "quarter-turn": quarter_turn,
    "non-isometric": non_isometric_fixture,
}


def random_orthogonal(d: int, rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def random_conditioned(d: int, rng, max_cond: float = 10.0) -> np.ndarray:
    """Random invertible matrix with condition number at most ``max_cond``."""
    s = np.exp(rng.uniform(-0.5, 0.5, size=d) * np.log(max_cond))
    return random_orthogonal(d, rng) @ np.diag(s) @ random_orthogonal(d, rng).T


def random_action(m: int, d: int, rng, orthogonal: bool = False, max_cond: float = 10.0,
                  translation_scale: float = 1.0) -> AffineAction:
    F = FreeGroup(m)
    gens = {}
    for i in range(1, m + 1):
        A = random_orthogonal(d, rng) if orthogonal else random_conditioned(d, rng, max_cond)
        gens[i] = (A, translation_scale * rng.standard_normal(d))
    if orthogonal:
        return AffineAction(F, d, gens, C=1.0, sigma=0.0)
    C = max(np.linalg.norm(A, 2) for A, _ in gens.values())
    return AffineAction(F, d, gens, C=float(C), sigma=1.0)
