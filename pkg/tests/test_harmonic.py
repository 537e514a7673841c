import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from hfl import fixtures
from hfl.affine import AffineAction
from hfl.groups import FreeGroup, reduce_word
from hfl.harmonic import (EquivariantMap, averaging, averaging_step, barycenter, delta,
                          find_fixed_point, laplacian, laplacian_direct, local_energy,
                          min_energy_vector, n_step_energy, near_critical_search, run_flow,
                          solve_harmonic)

a, A_, b, B = 1, -1, 2, -2


def z_action(A, shift):
    C = max(A, 1 / A)
    return AffineAction(FreeGroup(1), 1, {1: ([[A]], [shift])}, C=C, sigma=0.0 if C == 1 else 1.0)


def fmap(action, v):
    return EquivariantMap(action, np.atleast_1d(np.asarray(v, dtype=float)))


def conjugated(action, x):
    """Action g -> rho(x) rho(g) rho(x)^-1, for which g -> f(xg) is equivariant."""
    Ax, bx = action.maps(x)
    Axi = np.linalg.inv(Ax)
    gens = {}
    for i in range(1, action.group.m + 1):
        A, bs = action.generator_map(i)
        # rho(x) rho(s) rho(x)^-1 w = Ax A Axi w + Ax(bs - A Axi bx) + bx
        gens[i] = (Ax @ A @ Axi, Ax @ (bs - A @ Axi @ bx) + bx)
    return AffineAction(action.group, action.dim, gens, C=1e6, sigma=action.sigma)


class TestBasics:
    def test_barycenter_examples(self):
        np.testing.assert_allclose(barycenter([(1.0, [2.0, 3.0])]), [2.0, 3.0])
        np.testing.assert_allclose(barycenter([(0.5, [0, 0]), (0.5, [2, 0])]), [1.0, 0.0])
        np.testing.assert_allclose(barycenter([(0.25, [1]), (0.25, [3]), (0.5, [0])]), [1.0])

    def test_barycenter_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            barycenter([(0.3, [1.0])])

    def test_equivariance(self):
        rng = np.random.default_rng(0)
        act = fixtures.random_action(2, 3, rng)
        f = fmap(act, rng.standard_normal(3))
        F = act.group
        for _ in range(50):
            g = reduce_word(int(t) for t in rng.choice(F.tokens, size=4))
            x = reduce_word(int(t) for t in rng.choice(F.tokens, size=3))
            lhs = f(F.multiply(g, x))
            rhs = act.apply(g, f(x))
            assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(1.0, np.linalg.norm(rhs))

    def test_constant_iff_fixed_point(self):
        rot = fixtures.quarter_turn()
        assert fmap(rot, [0.5, 0.5]).is_constant()
        assert not fmap(rot, [0.0, 0.0]).is_constant()


class TestEnergy:
    def test_constant_map_has_zero_energy(self):
        f = fmap(fixtures.quarter_turn(), [0.5, 0.5])
        assert local_energy(f) == pytest.approx(0.0, abs=1e-30)

    def test_translation_local_energy(self):
        f = fmap(fixtures.z_translation(), [0.0])
        assert local_energy(f) == pytest.approx(0.5)
        assert local_energy(f, (a,)) == pytest.approx(0.5)

    def test_n_step_small_cases(self):
        act = fixtures.non_isometric_fixture()
        f = fmap(act, [0.3, -0.2])
        assert n_step_energy(f, None, 0) == 0.0
        assert n_step_energy(f, None, 1) == pytest.approx(local_energy(f), rel=1e-14)
        assert n_step_energy(f, (a, B), 1) == pytest.approx(local_energy(f, (a, B)), rel=1e-12)

    @pytest.mark.parametrize("n", range(1, 21))
    def test_translation_growth_exact(self, n):
        f = fmap(fixtures.z_translation(), [0.0])
        assert abs(n_step_energy(f, None, n) - n * 0.5) <= 1e-9

    def test_n_step_by_walk_enumeration(self):
        act = fixtures.non_isometric_fixture()
        f = fmap(act, [0.7, 0.1])
        F = act.group
        mu = F.walk_convolution(3).support
        fe = f(())
        expect = 0.5 * sum(p * float(np.sum((fe - f(w)) ** 2)) for w, p in mu.items())
        assert n_step_energy(f, None, 3) == pytest.approx(expect, rel=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_translation_identity(self, seed):
        rng = np.random.default_rng(seed)
        act = fixtures.random_action(2, 2, rng)
        f = fmap(act, rng.standard_normal(2))
        x = reduce_word(int(t) for t in rng.choice(act.group.tokens, size=2))
        g = fmap(conjugated(act, x), f(x))
        for n in (1, 2, 3):
            e_x, e_e = n_step_energy(f, x, n), n_step_energy(g, None, n)
            assert e_x == pytest.approx(e_e, rel=1e-8, abs=1e-12)
        assert local_energy(f, x) == pytest.approx(local_energy(g), rel=1e-8, abs=1e-12)

    def test_growth_lower_bound_isometric_fixtures(self):
        for act in (fixtures.z_translation(), fixtures.quarter_turn()):
            sol = solve_harmonic(act)
            v = sol.particular if sol.particular is not None else np.zeros(act.dim)
            f = fmap(act, v)
            E = local_energy(f)
            for n in range(1, 16):
                assert n_step_energy(f, None, n) >= 0.5 * n * E - 1e-12


class TestAveraging:
    def test_fixed_point_unchanged(self):
        f = fmap(fixtures.quarter_turn(), [0.5, 0.5])
        np.testing.assert_allclose(averaging(f).base, f.base)

    def test_translation(self):
        assert averaging_step(fixtures.z_translation(), [0.0])[0] == pytest.approx(0.0)

    def test_translation_by_two(self):
        act = z_action(1.0, 2.0)
        for v in (-3.0, 0.0, 1.5):
            assert averaging_step(act, [v])[0] == pytest.approx(v)


class TestLaplacian:
    def test_translation_is_harmonic(self):
        f = fmap(fixtures.z_translation(), [0.0])
        for x in [(), (a,), (A_, A_)]:
            assert np.linalg.norm(laplacian(f, x)) <= 1e-15

    def test_scaling_example(self):
        f = fmap(z_action(2.0, 0.0), [1.0])
        assert laplacian(f)[0] == pytest.approx(-1 / 8)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_closed_form_matches_direct_sum(self, seed):
        rng = np.random.default_rng(seed)
        act = fixtures.random_action(2, 3, rng)
        f = fmap(act, rng.standard_normal(3))
        x = reduce_word(int(t) for t in rng.choice(act.group.tokens, size=3))
        np.testing.assert_allclose(laplacian(f, x), laplacian_direct(f, x), atol=1e-9)


class TestFlow:
    def test_harmonic_start(self):
        f = fmap(fixtures.z_translation(), [0.0])
        trace, verdict = run_flow(f, radius=3, cap=20)
        assert verdict.kind == "Harmonic" and verdict.i0 == 0
        assert len(trace.iterates) == 1

    def test_trivial_action_is_harmonic(self):
        f = fmap(z_action(1.0, 0.0), [5.0])
        _, verdict = run_flow(f, radius=2, cap=5)
        assert verdict.kind == "Harmonic" and verdict.i0 == 0

    def test_scaling_flow_against_direct_ball(self):
        act = z_action(2.0, 0.0)
        f = fmap(act, [1.0])
        trace, verdict = run_flow(f, radius=3, cap=30)
        assert trace.violations == 0
        ball = act.group.ball(3)
        for i, v in enumerate(trace.iterates):
            fi = fmap(act, v)
            direct = max(np.linalg.norm(laplacian_direct(fi, x)) for x in ball)
            assert trace.ball_max[i] == pytest.approx(direct, rel=1e-9, abs=1e-15)
            assert trace.delta_e[i] == pytest.approx(np.linalg.norm(laplacian_direct(fi)), rel=1e-12)
        assert verdict.kind in ("Harmonic", "Stable")
        assert verdict.radius == 3 and verdict.cap == 30

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_monotonicity_property(self, seed):
        rng = np.random.default_rng(seed)
        act = fixtures.random_action(int(rng.integers(2, 4)), int(rng.integers(1, 6)), rng)
        trace, _ = run_flow(fmap(act, rng.standard_normal(act.dim)), radius=3, cap=10)
        assert trace.violations == 0

    def test_verdict_as_dict(self):
        _, verdict = run_flow(fmap(fixtures.z_translation(), [0.0]), radius=2, cap=3)
        d = verdict.as_dict(FreeGroup(1))
        assert d["kind"] == "Harmonic" and d["radius"] == 2 and d["cap"] == 3


class TestSolve:
    def test_translation_is_a_family(self):
        sol = solve_harmonic(fixtures.z_translation())
        assert sol.kind == "family" and sol.kernel.shape == (1, 1)

    def test_quarter_turn_unique(self):
        act = fixtures.quarter_turn()
        sol = solve_harmonic(act)
        assert sol.kind == "unique"
        # M = 0 so v = c = mean of b(a), b(a^-1)
        A, bb = act.generator_map(1)
        expect = 0.5 * (bb - np.linalg.inv(A) @ bb)
        np.testing.assert_allclose(sol.particular, expect, atol=1e-12)
        assert np.linalg.norm(laplacian(fmap(act, sol.particular))) <= 1e-12

    def test_no_solution(self):
        # a shear: M = I while c = (1/2, 0), so T(v) = v + c never fixes v
        act = AffineAction(FreeGroup(1), 2, {1: ([[1.0, 1.0], [0.0, 1.0]], [0.0, 1.0])},
                           C=2.0, sigma=1.0)
        sol = solve_harmonic(act)
        assert sol.kind == "none" and sol.particular is None
        assert sol.residual == pytest.approx(0.5)

    def test_fixed_point_is_solution(self):
        p = np.array([1.0, -2.0])
        A = fixtures.QUARTER_TURN
        act = AffineAction(FreeGroup(1), 2, {1: (A, (np.eye(2) - A) @ p)})
        sol = solve_harmonic(act)
        np.testing.assert_allclose(sol.particular, p, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_solution_is_harmonic_and_flow_agrees(self, seed):
        rng = np.random.default_rng(seed)
        act = fixtures.random_action(2, int(rng.integers(1, 5)), rng)
        sol = solve_harmonic(act)
        if sol.particular is None:
            return
        f = fmap(act, sol.particular)
        assert np.linalg.norm(laplacian(f)) <= 1e-9
        _, verdict = run_flow(f, radius=2, cap=5)
        assert verdict.kind == "Harmonic" and verdict.i0 == 0


class TestFixedPoint:
    def test_linear_action_fixes_origin(self):
        act = fixtures.random_action(2, 3, np.random.default_rng(1), translation_scale=0.0)
        np.testing.assert_allclose(find_fixed_point(act), 0.0, atol=1e-12)

    def test_translation_has_none(self):
        assert find_fixed_point(fixtures.z_translation()) is None

    def test_quarter_turn(self):
        np.testing.assert_allclose(find_fixed_point(fixtures.quarter_turn()), [0.5, 0.5], atol=1e-12)

    def test_iff_zero_energy(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            act = fixtures.random_action(int(rng.integers(1, 3)), 2, rng)
            v = find_fixed_point(act)
            vmin, _ = min_energy_vector(act)
            emin = local_energy(fmap(act, vmin))
            if v is None:
                assert emin > 1e-16
            else:
                assert local_energy(fmap(act, v)) <= 1e-16


class TestMinimizer:
    def test_translation(self):
        act = fixtures.z_translation()
        v, res = min_energy_vector(act)
        assert res == pytest.approx(0.0, abs=1e-15)
        for w in (-2.0, 0.0, 3.0):
            assert local_energy(fmap(act, [w])) == pytest.approx(0.5)

    def test_orthogonal_actions_are_harmonic(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            act = fixtures.random_action(int(rng.integers(1, 4)), int(rng.integers(1, 7)), rng,
                                         orthogonal=True)
            _, res = min_energy_vector(act)
            assert res <= 1e-8

    def test_non_isometric_fixture(self):
        act = fixtures.non_isometric_fixture()
        v, res = min_energy_vector(act)
        assert find_fixed_point(act) is None
        assert res > 0.01
        # independent minimizer of the energy
        opt = minimize(lambda w: local_energy(fmap(act, w)), np.zeros(2), method="BFGS",
                       options={"gtol": 1e-12})
        np.testing.assert_allclose(v, opt.x, atol=1e-5)

    def test_one_dimensional_actions_always_have_fixed_points(self):
        # why the non-isometric fixture lives in dimension two
        act = z_action(2.0, 1.0)
        assert find_fixed_point(act) is not None


class TestDelta:
    def test_fixed_point(self):
        act = fixtures.quarter_turn()
        assert delta(act, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
        v, path = near_critical_search(act, [0.5, 0.5], j=2.0)
        assert len(path) == 1

    def test_translation_constant_delta(self):
        act = fixtures.z_translation()
        for v in (-4.0, 0.0, 7.5):
            assert delta(act, [v]) == pytest.approx(1.0)
        v, path = near_critical_search(act, [3.0], j=4.0)
        assert v[0] == 3.0 and len(path) == 1

    def test_contraction_reaches_fixed_point(self):
        act = z_action(0.5, 0.0)
        assert delta(act, [8.0]) == pytest.approx(8.0)
        cap = 20
        v, path = near_critical_search(act, [8.0], j=4.0, cap=cap)
        assert abs(v[0]) <= 8.0 / 2**cap
        ds = [delta(act, w) for w in path]
        assert all(d2 < d1 / 2 for d1, d2 in zip(ds, ds[1:]))

    def test_j_must_be_at_least_one(self):
        with pytest.raises(ValueError):
            near_critical_search(fixtures.z_translation(), [0.0], j=0.5)
