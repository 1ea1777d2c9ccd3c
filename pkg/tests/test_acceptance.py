"""Exit criteria, one test per criterion at the stated tolerances.

Each test prints a one-line verdict; ``conftest.py`` adds a per-criterion
summary to the terminal report.
"""

import json
import math
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dsa2.bounds import BoundParams, disagreement_bound, measure_metrics, theorem1_bound, theorem2_bounds
from dsa2.cli import main
from dsa2.config import parse_config
from dsa2.convex import LocalObjective, ProxSetup, box, l2_ball, make_abs_linear_objective, nonneg_orthant, prox_map, simplex
from dsa2.dual import ChargingProblem, CoupledAgentSpec, psi_eval, run_dual_decomp
from dsa2.engine import GammaSchedule, dsa2_round, init_dsa2, run_dsa2
from dsa2.oracles import brute_force_charging, brute_force_min, centralized_sa2, solve_example_dual_bisection
from dsa2.topology import Topology, gen_small_world, is_connected, metropolis_weights

pytestmark = pytest.mark.acceptance


def verdict(k: int, ok: bool, detail: str) -> None:
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")


# ------------------------------------------------------------ random instances


def random_connected_graph(rng: np.random.Generator, n: int) -> Topology:
    """Erdos-Renyi graph redrawn until connected."""
    if n == 1:
        return Topology(1, ())
    p = rng.uniform(0.15, 0.6)
    while True:
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < p
        t = Topology(n, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
        if is_connected(t):
            return t


def max_affine_objective(A: np.ndarray, b: np.ndarray, norm) -> LocalObjective:
    """``max_k <A_k, x> + b_k``, Lipschitz with constant ``max_k ||A_k||_*``."""

    def value(x):
        return np.max(np.asarray(x, dtype=float) @ A.T + b, axis=-1)

    def subgrad(x):
        return A[np.argmax(np.asarray(x, dtype=float) @ A.T + b, axis=-1)]

    return LocalObjective(value, subgrad, float(norm.dual(A).max()))


def random_setup(rng: np.random.Generator, m: int) -> ProxSetup:
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return ProxSetup(box(-rng.uniform(0.2, 2, m), rng.uniform(0.2, 2, m)))
    if kind == 1:
        return ProxSetup(l2_ball(m, float(rng.uniform(0.5, 3))))
    if kind == 2:
        return ProxSetup(simplex(m))
    return ProxSetup(simplex(m), "entropic")


def random_objective(rng: np.random.Generator, m: int, norm) -> LocalObjective:
    if rng.random() < 0.5:
        return make_abs_linear_objective(rng.normal(scale=rng.uniform(0.2, 3), size=m), norm)
    k = int(rng.integers(2, 5))
    return max_affine_objective(rng.normal(size=(k, m)), rng.normal(size=k), norm)


def tracking_instances(count: int = 50, seed: int = 2024):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, m = int(rng.integers(1, 21)), int(rng.integers(1, 6))
        setup = random_setup(rng, m)
        problem = [random_objective(rng, m, setup.norm) for _ in range(n)]
        yield problem, setup, random_connected_graph(rng, n), setup.set.sample(rng, n), float(rng.uniform(0.1, 3))


# ------------------------------------------------------------------ criteria


def test_criterion_01_conservation():
    start = time.perf_counter()
    worst = 0.0
    for problem, setup, topo, x0, gamma0 in tracking_instances():
        p = metropolis_weights(topo)
        sched = GammaSchedule(gamma0)
        state, tracker = init_dsa2(problem, setup, x0)
        worst = max(worst, np.abs(tracker.s.mean(axis=0) - tracker.last_grad.mean(axis=0)).max())
        for _ in range(200):
            state, tracker = dsa2_round(state, tracker, problem, setup, p, sched)
            worst = max(worst, np.abs(tracker.s.mean(axis=0) - tracker.last_grad.mean(axis=0)).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10.0
    verdict(1, ok, f"max ||s_bar - g||_inf = {worst:.3e}, {elapsed:.2f} s")
    assert worst <= 1e-9
    assert elapsed < 10.0


def test_criterion_02_disagreement_bound():
    worst_ratio = 0.0
    violations = 0
    for problem, setup, topo, x0, gamma0 in tracking_instances():
        p = metropolis_weights(topo)
        sched = GammaSchedule(gamma0)
        L = max(o.lipschitz_bound for o in problem)
        bound = disagreement_bound(BoundParams(n=len(problem), sigma2=p.sigma2, gamma=gamma0, L=L))
        state, tracker = init_dsa2(problem, setup, x0)
        acc = tracker.last_grad.mean(axis=0)
        for _ in range(500):
            gap = setup.norm.dual(tracker.z - acc).max()
            violations += gap > bound + 1e-6
            if bound > 0:
                worst_ratio = max(worst_ratio, gap / bound)
            state, tracker = dsa2_round(state, tracker, problem, setup, p, sched)
            acc = acc + tracker.last_grad.mean(axis=0)
    verdict(2, violations == 0, f"worst gap / bound = {worst_ratio:.3f}")
    assert violations == 0


PAIRINGS = [
    ("box", "quadratic"),
    ("l2_ball", "quadratic"),
    ("nonneg_orthant", "quadratic"),
    ("simplex", "quadratic"),
    ("simplex", "entropic"),
]


@pytest.mark.parametrize("set_kind,prox", PAIRINGS)
def test_criterion_03_prox_lipschitz(set_kind, prox):
    rng = np.random.default_rng(PAIRINGS.index((set_kind, prox)))
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 8))
        feasible = {
            "box": lambda: box(-rng.uniform(0, 2, m), rng.uniform(0, 2, m)),
            "l2_ball": lambda: l2_ball(m, float(rng.uniform(0.1, 3))),
            "nonneg_orthant": lambda: nonneg_orthant(m),
            "simplex": lambda: simplex(m),
        }[set_kind]()
        setup = ProxSetup(feasible, prox)
        scale = 10.0 ** rng.uniform(-3, 2)
        u, v = rng.normal(scale=scale, size=m), rng.normal(scale=scale, size=m)
        if rng.random() < 0.3:
            v = u + rng.normal(scale=1e-3 * scale, size=m)
        gamma = 10.0 ** rng.uniform(-2, 2)
        lhs = float(setup.norm.primal(prox_map(u, gamma, setup) - prox_map(v, gamma, setup)))
        rhs = float(setup.norm.dual(u - v)) / gamma
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        assert lhs <= (1 + 1e-9) * rhs
    verdict(3, True, f"{set_kind}/{prox}: worst ratio {worst:.6f}")


def test_criterion_04_single_agent_reduction():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(10):
        m = int(rng.integers(1, 5))
        setup = random_setup(rng, m)
        obj = random_objective(rng, m, setup.norm)
        x0 = setup.set.sample(rng, 1)
        sched = GammaSchedule(float(rng.uniform(0.1, 3)))
        tr = run_dsa2([obj], setup, Topology(1, ()), sched, x0=x0, rounds=1000)
        ref = centralized_sa2(obj, setup, sched, x0=x0[0], rounds=1000)
        worst = max(worst, np.abs(tr.x[:, 0] - ref.x).max(), np.abs(tr.x_hat[:, 0] - ref.x_hat).max())
    verdict(4, worst <= 1e-12, f"max coordinate deviation {worst:.3e}")
    assert worst <= 1e-12


def test_criterion_05_objective_error_bound():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    worst_ratio, violations = 0.0, 0
    for _ in range(20):
        n, m = int(rng.integers(2, 11)), int(rng.integers(1, 3))
        setup = ProxSetup(box(-rng.uniform(0.2, 2, m), rng.uniform(0.2, 2, m)))
        A = rng.normal(size=(n, m))
        problem = [make_abs_linear_objective(a) for a in A]
        topo = random_connected_graph(rng, n)
        gamma0 = float(rng.uniform(0.2, 2.0))
        x0 = setup.set.sample(rng, n)
        tr = run_dsa2(problem, setup, topo, GammaSchedule(gamma0), x0=x0, rounds=2000)
        truth = brute_force_min(lambda pts, A=A: np.abs(pts @ A.T).mean(axis=1), setup.set, 1e-5)
        bp = BoundParams(n=n, sigma2=tr.sigma2, gamma=gamma0, L=tr.lipschitz, R2=float(setup.d_value(truth.x_star)))
        bound = theorem1_bound(tr.t, bp)[:, None]
        err = tr.f_values - truth.f_star
        violations += int(np.sum(err > bound + 1e-6))
        worst_ratio = max(worst_ratio, float((err / bound).max()))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 60.0
    verdict(5, ok, f"worst error / bound = {worst_ratio:.3f}, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 60.0


def test_criterion_06_dual_bounds():
    rng = np.random.default_rng(606)
    report = []
    for k in range(10):
        n = int(rng.integers(5, 21))
        c, d = np.maximum(rng.uniform(0, 1, n), 0.1), np.maximum(rng.uniform(0, 1, n), 0.1)
        # b below sum d_i log 2 keeps the instance strictly feasible
        b = float(rng.uniform(0.2, 0.9)) * float(d.sum()) * math.log(2.0)
        prob = ChargingProblem(c, d, b)
        truth = solve_example_dual_bisection(c, d, b)
        assert truth.kkt_residual <= 1e-8
        topo = gen_small_world(n, 4, 0.2, k)
        gamma0 = 0.2
        tr = run_dual_decomp(prob, topo, GammaSchedule(gamma0), rounds=10_000)
        m = measure_metrics(tr, truth)
        bp = BoundParams(n=n, sigma2=tr.sigma2, gamma=gamma0, D=tr.measured_D,
                         lambda_star_norm=float(np.linalg.norm(truth.lambda_star)),
                         C=truth.f_star - prob.unconstrained_min())
        bd = theorem2_bounds(tr.t, bp)
        dual_ok = bool(np.all(m.dual_err <= bd.dual_err[:, None] + 1e-6))
        pen_ok = bool(np.all(m.penalty <= bd.penalty + 1e-6))
        hi_ok = bool(np.all(m.primal_err <= bd.primal_hi + 1e-6))
        lo_ok = bool(np.all(m.primal_err >= bd.primal_lo - 1e-6))
        report.append((dual_ok, pen_ok, hi_ok, lo_ok))
    ok = all(all(r) for r in report)
    verdict(6, ok, f"{sum(all(r) for r in report)}/10 instances satisfy all four inequalities")
    assert ok, report


def test_criterion_07_reproduction(tmp_path):
    out = tmp_path / "scenario"
    start = time.perf_counter()
    code = main(["reproduce-paper", "--out", str(out)])
    elapsed = time.perf_counter() - start
    assert code == 0
    meta = json.loads((out / "meta.json").read_text())
    cfg = meta["config"]
    assert cfg["rounds"] == 100_000 and cfg["topology"] == {"kind": "small_world", "n": 50, "k": 4, "p_rewire": 0.2,
                                                            "seed": 42}
    assert cfg["instance"]["b"] == 5.0 and cfg["schedule"]["gamma0"] == 0.2
    for name in ("primal_error.svg", "penalty.svg"):
        ET.parse(out / name)
    checks = meta["checks"]
    assert checks["penalty_below_bound_all_t"]
    assert checks["penalty_decreasing_100_to_T"]
    # bound arithmetic with the reference constants
    p = BoundParams(n=50, sigma2=0.9788, gamma=0.2, D=0.3025, C=27.2067)
    network_const = 4 * p.n * (p.network_factor + 2.5) * p.D
    np.testing.assert_approx_equal(network_const, 2.0340e4, significant=4)
    np.testing.assert_approx_equal(2 * p.gamma * p.C, 10.8827, significant=4)
    verdict(7, True, f"sigma2 = {meta['sigma2']:.5f}, penalty constants {network_const:.6g} and "
                     f"{2 * p.gamma * p.C:.6g}, {elapsed:.1f} s")


def test_criterion_08_danskin_finite_differences():
    rng = np.random.default_rng(808)
    eps, worst, probes = 1e-5, 0.0, 0
    while probes < 500:
        c, d = float(rng.uniform(0.1, 1)), float(rng.uniform(0.1, 1))
        n, b = int(rng.integers(1, 60)), float(rng.uniform(0.5, 10))
        lam = float(rng.uniform(1e-3, 4 * c / d))
        u = lam * d / c - 1.0
        # keep every probe away from the two kinks of x(lam)
        if min(abs(u), abs(u - 1.0)) < 1e-3:
            continue
        share = b / n
        if probes % 5 == 0:
            # general agent without a closed-form maximizer
            agent = CoupledAgentSpec(f=lambda x, c=c: c * x[0], lo=[0.0], hi=[1.0],
                                     h=lambda x, d=d, s=share: np.array([s - d * math.log1p(x[0])]))
        else:
            agent = ChargingProblem([c] * n, [d] * n, b).agents()[0]
        _, grad = psi_eval(agent, [lam])
        fd = (psi_eval(agent, [lam + eps])[0] - psi_eval(agent, [lam - eps])[0]) / (2 * eps)
        worst = max(worst, abs(fd - grad[0]))
        probes += 1
    verdict(8, worst <= 1e-4, f"max |FD - grad| = {worst:.3e} over {probes} probes")
    assert worst <= 1e-4


def test_criterion_09_oracle_cross_check():
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        c, d = np.maximum(rng.uniform(0, 1, n), 0.1), np.maximum(rng.uniform(0, 1, n), 0.1)
        b = float(rng.uniform(0.2, 0.9)) * float(d.sum()) * math.log(2.0)
        exact = solve_example_dual_bisection(c, d, b)
        grid = brute_force_charging(c, d, b, resolution=1e-7)
        worst = max(worst, abs(exact.f_star - grid.f_star) / float(np.linalg.norm(c)))
    verdict(9, worst <= 1e-4, f"max |f*_bisection - f*_grid| / L = {worst:.3e}")
    assert worst <= 1e-4


DETERMINISM_CONFIGS = {
    "dsa2_box": {"kind": "dsa2", "topology": {"kind": "small_world", "n": 12, "k": 4, "p_rewire": 0.3, "seed": 5},
                 "instance": {"family": "abs_linear", "m": 2, "seed": 5, "x0": "random"}},
    "dsa2_ball": {"kind": "dsa2", "topology": {"kind": "cycle", "n": 6},
                  "instance": {"family": "abs_linear", "m": 3, "set": "l2_ball", "seed": 6, "x0": "random"}},
    "dsa2_entropic": {"kind": "dsa2", "topology": {"kind": "star", "n": 5},
                      "instance": {"family": "abs_linear", "m": 4, "set": "simplex", "prox": "entropic", "seed": 7,
                                   "x0": "random"}},
    "dual_decomp": {"kind": "dual_decomp", "topology": {"kind": "small_world", "n": 20, "k": 4, "p_rewire": 0.2,
                                                        "seed": 8},
                    "instance": {"family": "charging", "b": 3.0, "seed": 8}},
    "compare": {"kind": "compare", "topology": {"kind": "path", "n": 7},
                "instance": {"family": "charging", "b": 1.0, "seed": 9}},
    "baseline_dda": {"kind": "baseline", "topology": {"kind": "complete", "n": 4}, "baseline": {"tag": "dda"},
                     "instance": {"family": "charging", "b": 0.8, "seed": 10}},
    "reproduce_paper": {"kind": "reproduce_paper", "downsample": 50,
                        "topology": {"kind": "small_world", "n": 50, "k": 4, "p_rewire": 0.2, "seed": 42},
                        "instance": {"family": "charging", "b": 5.0, "seed": 42}},
}


@pytest.mark.parametrize("name", list(DETERMINISM_CONFIGS))
def test_criterion_10_determinism(tmp_path, name):
    from dsa2.experiment import run_experiment

    cfg = parse_config({"rounds": 500, "schedule": {"gamma0": 0.2}, **DETERMINISM_CONFIGS[name]})
    assert run_experiment(cfg, tmp_path / "a") == 0
    assert run_experiment(cfg, tmp_path / "b") == 0
    a, b = (tmp_path / "a" / "trace.csv").read_bytes(), (tmp_path / "b" / "trace.csv").read_bytes()
    verdict(10, a == b, f"{name}: {len(a)} bytes")
    assert a == b
