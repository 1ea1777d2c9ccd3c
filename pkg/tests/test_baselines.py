import numpy as np
import pytest

from dsa2.baselines import BaselineKind, run_consensus_dual_subgrad, run_dda, run_dda_dual
from dsa2.convex import ProxSetup, box, make_abs_linear_objective
from dsa2.dual import ChargingProblem, random_charging, run_dual_decomp
from dsa2.engine import GammaSchedule, run_dsa2
from dsa2.errors import ParameterError
from dsa2.topology import Topology, gen_named, gen_small_world

BOX1 = ProxSetup(box([-1.0], [1.0]))


def test_baseline_kind_validation():
    assert BaselineKind("consensus_subgrad_decaying", a0=10.0).step(9) == 1.0
    assert BaselineKind("consensus_subgrad_constant", alpha=0.05).step(1000) == 0.05
    with pytest.raises(ParameterError):
        BaselineKind("doubling_trick")
    with pytest.raises(ParameterError):
        BaselineKind("consensus_subgrad_decaying", a0=0.0)
    with pytest.raises(ParameterError):
        BaselineKind("consensus_subgrad_constant", alpha=-1.0)


def test_dda_single_agent_stays_at_kink():
    tr = run_dda([make_abs_linear_objective([1.0])], BOX1, Topology(1, ()), GammaSchedule(1.0), x0=[[0.0]], rounds=50)
    assert not tr.x_hat.any() and not tr.x.any()


def test_dda_identical_agents_identical_trajectories():
    obj = make_abs_linear_objective([0.7, -0.4])
    setup = ProxSetup(box([-1.0, -1.0], [1.0, 1.0]))
    tr = run_dda([obj] * 4, setup, gen_named("cycle", 4), GammaSchedule(0.5), x0=np.tile([0.3, -0.6], (4, 1)),
                 rounds=200)
    assert np.all(tr.x == tr.x[:, :1]) and np.all(tr.x_hat == tr.x_hat[:, :1])


def test_dda_records_ergodic_average():
    rng = np.random.default_rng(1)
    setup = ProxSetup(box([-1.0, -1.0], [1.0, 1.0]))
    problem = [make_abs_linear_objective(rng.normal(size=2)) for _ in range(5)]
    x0 = setup.set.sample(rng, 5)
    tr = run_dda(problem, setup, gen_small_world(5, 2, 0.3, 0), GammaSchedule(0.4), x0=x0, rounds=150)
    sums = np.cumsum(np.concatenate([x0[None], tr.x_hat]), axis=0)[1:]
    np.testing.assert_allclose(tr.x, sums / np.arange(2, 152)[:, None, None], atol=1e-12)


def test_dda_differs_from_dsa2_on_generic_instance():
    rng = np.random.default_rng(7)
    setup = ProxSetup(box([-1.0, -1.0], [1.0, 1.0]))
    problem = [make_abs_linear_objective(rng.normal(size=2)) for _ in range(6)]
    x0 = setup.set.sample(rng, 6)
    topo = gen_small_world(6, 2, 0.2, 3)
    a = run_dda(problem, setup, topo, GammaSchedule(0.5), x0=x0, rounds=300)
    b = run_dsa2(problem, setup, topo, GammaSchedule(0.5), x0=x0, rounds=300)
    assert np.max(np.abs(a.x - b.x)) > 1e-3


def test_dda_dual_nonnegative_and_distinct_from_algorithm():
    prob = random_charging(8, seed=4, b=1.5)
    topo = gen_small_world(8, 4, 0.2, 4)
    a = run_dda_dual(prob, topo, GammaSchedule(0.2), rounds=500)
    b = run_dual_decomp(prob, topo, GammaSchedule(0.2), rounds=500)
    assert np.all(a.lam >= 0) and np.all(a.lam_hat >= 0)
    assert np.max(np.abs(a.lam - b.lam)) > 1e-6


@pytest.mark.parametrize("kind", [BaselineKind("consensus_subgrad_decaying", a0=10.0),
                                  BaselineKind("consensus_subgrad_constant", alpha=0.05)])
def test_consensus_dual_feasible(kind):
    prob = random_charging(10, seed=6, b=2.0)
    tr = run_consensus_dual_subgrad(prob, gen_small_world(10, 4, 0.2, 6), kind, rounds=800)
    assert np.all(tr.lam >= 0)
    assert tr.lam_hat is None
    assert np.all((tr.x_avg >= 0) & (tr.x_avg <= 1))


def test_zero_stepsize_is_pure_consensus():
    prob = random_charging(7, seed=8, b=1.0)
    lam0 = np.random.default_rng(8).uniform(0, 3, (7, 1))
    tr = run_consensus_dual_subgrad(prob, gen_named("path", 7), BaselineKind("consensus_subgrad_constant", alpha=1.0),
                                    lambda0=lam0, rounds=100, step_scale=0.0)
    assert np.max(np.abs(tr.lam.mean(axis=1) - lam0.mean(axis=0))) <= 1e-12


def test_single_agent_projected_subgradient_steps():
    prob = ChargingProblem([0.6], [0.9], b=0.4)
    alpha = 0.3
    tr = run_consensus_dual_subgrad(prob, Topology(1, ()), BaselineKind("consensus_subgrad_constant", alpha=alpha),
                                    rounds=20)
    lam = np.zeros((1, 1))
    for k in range(20):
        _, g = prob.grad_psi(lam)
        lam = np.maximum(lam - alpha * g, 0.0)
        np.testing.assert_allclose(tr.lam[k], lam, atol=1e-15)
    # first step from zero: grad psi(0) = -b, so lam_1 = alpha b
    assert tr.lam[0, 0, 0] == pytest.approx(alpha * 0.4)


def test_consensus_rejects_dda_tag_and_zero_rounds():
    prob = random_charging(3, seed=0, b=1.0)
    with pytest.raises(ParameterError):
        run_consensus_dual_subgrad(prob, gen_named("path", 3), BaselineKind("dda"), rounds=5)
    with pytest.raises(ParameterError):
        run_consensus_dual_subgrad(prob, gen_named("path", 3), BaselineKind("consensus_subgrad_constant"), rounds=0)
    with pytest.raises(ParameterError):
        run_dda_dual(prob, gen_named("path", 3), GammaSchedule(1.0), rounds=0)
