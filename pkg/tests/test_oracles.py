import math

import numpy as np
import pytest

from dsa2.bounds import BoundParams, theorem1_bound
from dsa2.convex import ProxSetup, box, l2_ball, make_abs_linear_objective, simplex
from dsa2.engine import GammaSchedule
from dsa2.errors import InfeasibleError, ParameterError
from dsa2.oracles import (
    brute_force_charging,
    brute_force_min,
    centralized_sa2,
    charging_kkt_residual,
    multilevel_grid_min,
    solve_example_dual_bisection,
)


def test_centralized_stays_at_optimum_from_zero():
    tr = centralized_sa2(make_abs_linear_objective([1.0]), ProxSetup(box([-1.0], [1.0])), GammaSchedule(1.0),
                         x0=[0.0], rounds=50)
    assert not tr.x.any() and not tr.x_hat.any()


def test_centralized_within_single_agent_bound_and_feasible():
    rng = np.random.default_rng(8)
    a = rng.normal(size=2)
    setup = ProxSetup(box([-1.0, -1.0], [1.0, 1.0]))
    obj = make_abs_linear_objective(a)
    tr = centralized_sa2(obj, setup, GammaSchedule(1.0), x0=[0.9, -0.8], rounds=1000)
    truth = brute_force_min(lambda p: np.abs(p @ a), setup.set, 1e-5)
    bound = theorem1_bound(np.arange(1, 1001), BoundParams(n=1, sigma2=0.0, gamma=1.0, L=obj.lipschitz_bound,
                                                          R2=float(setup.d_value(truth.x_star))))
    assert np.all(obj.value(tr.x) - truth.f_star <= bound + 1e-6)
    assert setup.set.contains(tr.x)


def test_bisection_examples():
    t0 = solve_example_dual_bisection([1.0], [1.0], 0.0)
    assert t0.lambda_star[0] == 0.0 and t0.x_star[0] == 0.0 and t0.f_star == 0.0
    t1 = solve_example_dual_bisection([1.0], [1.0], math.log(2.0))
    assert t1.x_star[0] == pytest.approx(1.0, abs=1e-9)
    assert t1.f_star == pytest.approx(1.0, abs=1e-9)
    assert t1.lambda_star[0] == pytest.approx(2.0, abs=1e-8)
    t2 = solve_example_dual_bisection([1.0, 1.0], [1.0, 1.0], math.log(2.0))
    np.testing.assert_allclose(t2.x_star, [math.sqrt(2) - 1] * 2, atol=1e-9)
    assert t2.f_star == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-9)
    for t in (t0, t1, t2):
        assert t.kkt_residual <= 1e-8


def test_bisection_examples_against_grid():
    grid = np.linspace(0, 1, 1_000_001)
    feasible = np.log1p(grid) >= math.log(2.0) - 1e-12
    assert grid[feasible].min() == 1.0
    # symmetric two-agent instance, reduced along x1 = x2
    sym = grid[2 * np.log1p(grid) >= math.log(2.0)].min()
    assert abs(sym - (math.sqrt(2) - 1)) <= 1e-6


def test_bisection_infeasible():
    with pytest.raises(InfeasibleError):
        solve_example_dual_bisection([1.0, 1.0], [0.5, 0.5], 1.0)
    with pytest.raises(ParameterError):
        solve_example_dual_bisection([0.0], [1.0], 0.1)


def test_slack_constraint_gives_zero_multiplier():
    t = solve_example_dual_bisection([0.3, 0.2], [0.5, 0.4], -1.0)
    assert t.lambda_star[0] == 0.0 and t.f_star == 0.0


def test_g_monotone_on_random_instances():
    rng = np.random.default_rng(12)
    lams = np.linspace(0, 50, 2001)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        c, d = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, n)
        x = np.clip(lams[:, None] * d / c - 1, 0, 1)
        g = 2.0 - np.log1p(x) @ d
        assert np.all(np.diff(g) <= 1e-12)


def test_kkt_residual_on_random_instances():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(1, 60))
        c, d = np.maximum(rng.uniform(0, 1, n), 0.1), np.maximum(rng.uniform(0, 1, n), 0.1)
        b = float(rng.uniform(0.05, 0.95)) * d.sum() * math.log(2)
        t = solve_example_dual_bisection(c, d, b)
        assert t.kkt_residual <= 1e-8
        assert charging_kkt_residual(t.lambda_star[0], c, d, b) == t.kkt_residual
    # a wrong multiplier has a visible residual
    assert charging_kkt_residual(0.0, [1.0], [1.0], 0.5) > 0.1


def test_brute_force_examples():
    t = brute_force_min(lambda p: np.abs(p[:, 0]), box([-1.0], [1.0]), 1e-5)
    assert t.f_star == 0.0 and t.x_star[0] == 0.0
    t = brute_force_min(lambda p: np.abs(p @ [1.0, 1.0]), box([0.0, 0.0], [1.0, 1.0]), 1e-5)
    assert t.f_star == 0.0
    t = brute_force_min(lambda p: p @ [1.0, 2.0], box([0.0, 0.0], [1.0, 1.0]), 1e-5)
    assert t.f_star == 0.0 and np.array_equal(t.x_star, [0.0, 0.0])
    with pytest.raises(ParameterError):
        brute_force_min(lambda p: p.sum(axis=1), box(np.zeros(3), np.ones(3)), 1e-3)
    with pytest.raises(ParameterError):
        brute_force_min(lambda p: p.sum(axis=1), simplex(2), 1e-3)


def test_brute_force_ball_linear():
    t = brute_force_min(lambda p: p @ [3.0, 4.0], l2_ball(2, 1.0), 1e-5)
    assert t.f_star == pytest.approx(-5.0, abs=5 * 1e-5 * math.sqrt(2))


def test_multilevel_matches_exhaustive_on_small_grid():
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = rng.normal(size=(2, 2))
        q = q @ q.T + 0.01 * np.eye(2)
        c = rng.uniform(-1, 1, 2)

        def F(p, q=q, c=c):
            return np.einsum("ki,ij,kj->k", p - c, q, p - c)

        full_x, full_f = multilevel_grid_min(F, [-1, -1], [1, 1], 1e-3, budget=10**7)
        ml_x, ml_f = multilevel_grid_min(F, [-1, -1], [1, 1], 1e-3, budget=400)
        assert ml_f <= full_f + 1e-12


def test_brute_force_charging_matches_bisection():
    rng = np.random.default_rng(21)
    for _ in range(8):
        n = int(rng.integers(1, 4))
        c, d = np.maximum(rng.uniform(0, 1, n), 0.1), np.maximum(rng.uniform(0, 1, n), 0.1)
        b = float(rng.uniform(0.2, 0.9)) * d.sum() * math.log(2)
        exact = solve_example_dual_bisection(c, d, b)
        grid = brute_force_charging(c, d, b, resolution=1e-6)
        assert abs(grid.f_star - exact.f_star) <= np.linalg.norm(c) * 1e-4
        assert d @ np.log1p(grid.x_star) >= b - 1e-9
    with pytest.raises(ParameterError):
        brute_force_charging(np.ones(6), np.ones(6), 1.0)
    with pytest.raises(InfeasibleError):
        brute_force_charging([1.0, 1.0], [0.5, 0.5], 1.0)
    with pytest.raises(InfeasibleError):
        brute_force_charging([1.0], [0.5], 1.0)
