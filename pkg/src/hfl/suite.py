"""The acceptance battery: one function per criterion, each returning a result dict.

Every check draws its randomness from ``SeedSequence([seed, criterion_id])`` so
the battery is reproducible and individual checks are independent of each
other.  Results hold no timing data; timings are returned separately by
:func:`run_suite`.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import minimize

from . import fixtures
from .affine import AffineAction
from .expanders import energy_from_walk, random_regular, spectral_gap
from .graph_model import (GirthBoundError, WalkSkeleton, beta, fit_mixture, pushforward_walk,
                          random_walk_path, sample_labelling)
from .groups import FreeGroup, cyclically_reduce, reduce_word
from .harmonic import (EquivariantMap, find_fixed_point, laplacian, local_energy,
                       min_energy_vector, n_step_energy, run_flow, solve_harmonic)
from .spectral import (complete_link, fixed_point_criterion, link_from_weights, poincare_k2,
                       rayleigh_ratio)

SQRT2 = math.sqrt(2.0)


def _rng(seed: int, k: int):
    return np.random.default_rng(np.random.SeedSequence([int(seed), k]))


def translation_oracle(seed: int = 0) -> dict:
    action = fixtures.z_translation()
    f = EquivariantMap(action, [0.0])
    lap = float(np.linalg.norm(laplacian(f)))
    E = local_energy(f)
    errs = [abs(n_step_energy(f, None, n) - n * E) for n in range(1, 21)]
    return {"laplacian_norm": lap, "local_energy": E, "max_growth_error": max(errs),
            "pass": lap <= 1e-12 and max(errs) <= 1e-9}


def monotonicity(seed: int = 0, instances: int = 100, steps: int = 20, radius: int = 4) -> dict:
    rng = _rng(seed, 2)
    violations = 0
    worst = 0.0
    checked = 0
    for _ in range(instances):
        m = int(rng.integers(2, 4))
        d = int(rng.integers(1, 9))
        action = fixtures.random_action(m, d, rng)
        f = EquivariantMap(action, rng.standard_normal(d))
        trace, _ = run_flow(f, radius=radius, cap=steps)
        violations += trace.violations
        worst = max(worst, trace.worst_excess)
        checked += len(trace.ratios)
    return {"instances": instances, "steps_checked": checked, "violations": violations,
            "worst_excess": worst, "pass": violations == 0}


def energy_inequality(seed: int = 0, graphs: int = 100, maps: int = 10, max_n: int = 10) -> dict:
    rng = _rng(seed, 3)
    failures = 0
    worst = 0.0
    cases = 0
    for _ in range(graphs):
        V = 2 * int(rng.integers(25, 101))
        g = random_regular(V, 4, int(rng.integers(2**31)))
        lam = spectral_gap(g)
        P = g.transition()
        nu = g.stationary()
        powers = [P]
        for _ in range(max_n - 1):
            powers.append(powers[-1] @ P)
        for _ in range(maps):
            phi = rng.standard_normal((V, int(rng.integers(1, 4))))
            e1 = energy_from_walk(P, nu, phi)
            rhs = 2.0 / lam * e1
            for n in range(1, max_n + 1):
                lhs = energy_from_walk(powers[n - 1], nu, phi)
                cases += 1
                worst = max(worst, lhs / rhs)
                if lhs > rhs + 1e-10 * max(1.0, rhs):
                    failures += 1
    return {"graphs": graphs, "cases": cases, "failures": failures,
            "worst_lhs_over_rhs": worst, "pass": failures == 0}


def minimizer_harmonicity(seed: int = 0, actions: int = 50) -> dict:
    rng = _rng(seed, 4)
    worst = 0.0
    for _ in range(actions):
        m = int(rng.integers(1, 4))
        d = int(rng.integers(1, 7))
        action = fixtures.random_action(m, d, rng, orthogonal=True)
        _, res = min_energy_vector(action)
        worst = max(worst, res)
    _, fixture_res = min_energy_vector(fixtures.non_isometric_fixture())
    return {"actions": actions, "worst_isometric_residual": worst,
            "non_isometric_residual": fixture_res,
            "pass": worst <= 1e-8 and fixture_res > 0.01}


def _mixed_action(rng) -> AffineAction:
    """Random action drawn so that about half of the draws have a fixed point."""
    m = int(rng.integers(1, 4))
    d = int(rng.integers(1, 6))
    kind = int(rng.integers(3))
    action = fixtures.random_action(m, d, rng, orthogonal=kind == 0)
    if rng.random() < 0.5:
        p = rng.standard_normal(d)
        gens = {}
        for i in range(1, m + 1):
            A, _ = action.generator_map(i)
            gens[i] = (A, (np.eye(d) - A) @ p)
        action = AffineAction(action.group, d, gens, C=action.C, sigma=action.sigma)
    return action


def fixed_point_consistency(seed: int = 0, actions: int = 50) -> dict:
    rng = _rng(seed, 5)
    mismatches = 0
    flow_failures = 0
    with_fixed = 0
    solved = 0
    for _ in range(actions):
        action = _mixed_action(rng)
        v = find_fixed_point(action)
        vmin, _ = min_energy_vector(action)
        min_energy = local_energy(EquivariantMap(action, vmin))
        if v is not None:
            with_fixed += 1
            f = EquivariantMap(action, v)
            ok = local_energy(f) <= 1e-16 and np.linalg.norm(laplacian(f)) <= 1e-9
            sol = solve_harmonic(action)
            if sol.particular is None:
                ok = False
            else:
                diff = v - sol.particular
                if sol.kernel.size:
                    diff = diff - sol.kernel @ (sol.kernel.T @ diff)
                ok = ok and np.linalg.norm(diff) <= 1e-7 * max(1.0, np.linalg.norm(v))
        else:
            ok = min_energy > 1e-16
        mismatches += not ok
        sol = solve_harmonic(action)
        if sol.particular is not None:
            solved += 1
            _, verdict = run_flow(EquivariantMap(action, sol.particular), radius=2, cap=10)
            if not (verdict.kind == "Harmonic" and verdict.i0 == 0):
                flow_failures += 1
    return {"actions": actions, "with_fixed_point": with_fixed, "harmonic_solved": solved,
            "mismatches": mismatches, "flow_failures": flow_failures,
            "pass": mismatches == 0 and flow_failures == 0}


def fixed_graph(seed: int = 0):
    return random_regular(50, 4, seed=1000 + int(seed), min_girth=6)


def pushforward_soundness(seed: int = 0, walks: int = 1000) -> dict:
    rng = _rng(seed, 6)
    g = fixed_graph(seed)
    girth = g.girth()
    alpha = sample_labelling(g, 2, np.random.SeedSequence([int(seed), 6, 0]))
    mass_err = 0.0
    in_ball = True
    for n in (1, 2):
        pw = pushforward_walk(alpha, (), n, WalkSkeleton(g, n, girth))
        mass_err = max(mass_err, abs(pw.measure.total() - 1.0))
        in_ball &= all(len(w) <= n for w in pw.support)
    try:
        WalkSkeleton(g, int(math.ceil(girth / 2)), girth)
        rejects = False
    except GirthBoundError:
        rejects = True
    mismatches = 0
    for i in range(walks):
        a = sample_labelling(g, 2, np.random.SeedSequence([int(seed), 6, 1, i]))
        n = int(rng.integers(1, 3))
        u = int(rng.integers(g.V))
        path = random_walk_path(g, u, n, rng)
        if a.path_label(path) != beta(a, u, (), path[-1], girth):
            mismatches += 1
    return {"girth": girth, "mass_error": mass_err, "support_in_ball": bool(in_ball),
            "rejects_large_n": rejects, "walks": walks, "label_mismatches": mismatches,
            "pass": girth >= 6 and mass_err <= 1e-12 and in_ball and rejects and mismatches == 0}


def mixture_fit(seed: int = 0, samples: int = 2000) -> dict:
    g = fixed_graph(seed)
    f1 = fit_mixture(g, 2, 1, samples, seed)
    f2 = fit_mixture(g, 2, 2, samples, seed + 1)
    odd = float(f2.weights[1])
    ok1 = f1.residual < 0.02 and abs(f1.weights[1] - 1.0) < 0.02
    ok2 = f2.residual < 0.05 and odd < 0.02
    return {"n1": f1.as_dict(), "n2": f2.as_dict(), "n2_odd_weight": odd, "pass": bool(ok1 and ok2)}


def _random_link(rng, k: int):
    while True:
        weights = {}
        for i in range(k):
            for j in range(i + 1, k):
                if rng.random() < 0.6:
                    weights[(i, j)] = float(rng.uniform(0.2, 3.0))
        link = link_from_weights(k, weights)
        if weights and link.is_connected():
            return link


def rayleigh_optimum(link, rng, starts: int = 4) -> float:
    """Largest Poincare ratio found by BFGS from random starts."""
    k = len(link.vertices)
    best = 0.0
    for _ in range(starts):
        x0 = rng.standard_normal(k)
        res = minimize(lambda f: -rayleigh_ratio(link, f), x0, method="BFGS",
                       options={"gtol": 1e-10, "maxiter": 2000})
        best = max(best, -float(res.fun))
    return best


def kappa_correctness(seed: int = 0, links: int = 20) -> dict:
    rng = _rng(seed, 8)
    complete_err = max(abs(poincare_k2(complete_link(k)).kappa2 - math.sqrt((k - 1) / k))
                       for k in range(3, 9))
    rayleigh_err = 0.0
    for _ in range(links):
        link = _random_link(rng, int(rng.integers(2, 9)))
        rep = poincare_k2(link)
        rayleigh_err = max(rayleigh_err, abs(math.sqrt(rayleigh_optimum(link, rng)) - rep.kappa2))
    wrong = 0
    for _ in range(200):
        link = _random_link(rng, int(rng.integers(2, 9)))
        rep = poincare_k2(link)
        C = float(rng.choice([rng.uniform(0.5, 3.0), SQRT2 / rep.kappa2 * (1 + rng.uniform(-1e-6, 1e-6))]))
        expect = C * rep.kappa2 < SQRT2 - 1e-12
        wrong += fixed_point_criterion(rep, C)["certified"] != expect
    return {"complete_error": complete_err, "rayleigh_error": rayleigh_err,
            "criterion_disagreements": wrong,
            "pass": complete_err <= 1e-8 and rayleigh_err <= 1e-6 and wrong == 0}


def conjugacy_oracle(seed: int = 0, words: int = 500) -> dict:
    rng = _rng(seed, 9)
    F = FreeGroup(2)
    conjugators = F.ball(3)
    mismatches = 0
    for _ in range(words):
        length = int(rng.integers(0, 7))
        w = reduce_word(int(t) for t in rng.choice(F.tokens, size=length))
        brute = min(len(F.multiply(F.multiply(u, w), F.inverse(u))) for u in conjugators)
        if len(cyclically_reduce(w)) != brute or F.conjugacy_length(w) != brute:
            mismatches += 1
    return {"words": words, "mismatches": mismatches, "pass": mismatches == 0}


CRITERIA = {
    1: ("translation oracle", translation_oracle),
    2: ("flow monotonicity", monotonicity),
    3: ("spectral energy inequality", energy_inequality),
    4: ("isometric minimizer harmonicity", minimizer_harmonicity),
    5: ("fixed point / flow consistency", fixed_point_consistency),
    6: ("pushforward soundness", pushforward_soundness),
    7: ("mixture fit", mixture_fit),
    8: ("kappa2 correctness", kappa_correctness),
    9: ("conjugacy length oracle", conjugacy_oracle),
}


def run_suite(seed: int = 0, only=None):
    """Run the battery; returns ``(results, timings)``."""
    results, timings = {}, {}
    for k, (title, fn) in CRITERIA.items():
        if only is not None and k not in only:
            continue
        t0 = time.perf_counter()
        r = fn(seed)
        timings[str(k)] = time.perf_counter() - t0
        results[str(k)] = {"title": title, **r}
    return results, timings
