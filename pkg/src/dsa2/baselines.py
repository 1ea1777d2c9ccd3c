"""Comparison methods built on the same prox, tracking and oracle machinery.

* Distributed dual averaging: same prox step and tracker as DSA2, but
  subgradients are taken at the prox output ``x_hat`` and the running
  average is only reported, never fed back.
* Consensus projected dual subgradient: ``lam <- max(0, P lam - a_t grad)``
  with a decaying ``a0 / (t + 1)`` or constant step, plus primal recovery
  by running averages.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .convex import LocalObjective, ProxSetup, prox_map
from .dual import CoupledAgentSpec, CoupledProblem, DualRecorder, as_problem, init_dual, orthant_setup
from .engine import GammaSchedule, as_weights, init_dsa2, local_subgrads, network_objective
from .errors import ParameterError
from .topology import Topology, WeightMatrix
from .trace import DualTrace, PrimalTrace
from .tracking import init_tracking, tracking_step


@dataclass(frozen=True)
class BaselineKind:
    """``tag`` is ``dda``, ``consensus_subgrad_decaying`` (uses ``a0``) or
    ``consensus_subgrad_constant`` (uses ``alpha``)."""

    tag: str
    a0: float = 10.0
    alpha: float = 0.05

    def __post_init__(self):
        if self.tag not in ("dda", "consensus_subgrad_decaying", "consensus_subgrad_constant"):
            raise ParameterError(f"unknown baseline {self.tag!r}")
        if self.a0 <= 0 or self.alpha <= 0:
            raise ParameterError("stepsize parameters must be positive")

    def step(self, t: int) -> float:
        if self.tag == "consensus_subgrad_decaying":
            return self.a0 / (t + 1)
        return self.alpha


def run_dda(
    problem: Sequence[LocalObjective],
    setup: ProxSetup,
    topology: Topology | WeightMatrix,
    sched: GammaSchedule,
    x0=None,
    rounds: int = 1000,
) -> PrimalTrace:
    """Distributed dual averaging with subgradients at ``x_hat``.

    The trace's ``x`` holds the ergodic averages ``(1/(t+1)) sum_k x_hat_k``
    (with ``x_hat_0 = x0``) and ``f_values`` is evaluated there.
    """
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    p = as_weights(topology)
    n, m = len(problem), setup.m
    if p.n != n:
        raise ParameterError(f"graph has {p.n} nodes but problem has {n} agents")
    state, tracker = init_dsa2(problem, setup, x0)
    avg = state.x.copy()
    xs = np.empty((rounds, n, m))
    xh = np.empty((rounds, n, m))
    fv = np.empty((rounds, n))
    sd = np.empty((rounds, n))
    for t in range(rounds):
        x_hat = prox_map(tracker.z, sched(t), setup)
        tracker = tracking_step(tracker, p, local_subgrads(problem, x_hat))
        avg = ((t + 1) * avg + x_hat) / (t + 2)
        xs[t], xh[t] = avg, x_hat
        fv[t] = network_objective(problem, avg)
        sd[t] = setup.norm.dual(tracker.s - tracker.last_grad.mean(axis=0))
    return PrimalTrace("dda", np.arange(1, rounds + 1), xs, xh, fv, sd, state.x.copy(),
                       max(o.lipschitz_bound for o in problem), p.sigma2, setup.norm.tag)


def run_dda_dual(
    agents: CoupledProblem | Sequence[CoupledAgentSpec],
    topology: Topology | WeightMatrix,
    sched: GammaSchedule,
    lambda0=None,
    rounds: int = 1000,
) -> DualTrace:
    """Dual averaging on the Lagrangian dual; ``lam`` in the trace is the ergodic average."""
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    problem = as_problem(agents)
    p = as_weights(topology)
    state, _ = init_dual(problem, lambda0)
    x_cur, grads = problem.grad_psi(state.lam)
    tracker = init_tracking(grads)
    lam_avg, x_avg = state.lam.copy(), x_cur.copy()
    rec = DualRecorder(problem, rounds, float(np.linalg.norm(grads, axis=1).max()))
    setup = orthant_setup(problem.m)
    for t in range(rounds):
        lam_hat = prox_map(tracker.z, sched(t), setup)
        x_cur, grads = problem.grad_psi(lam_hat)
        tracker = tracking_step(tracker, p, grads)
        lam_avg = ((t + 1) * lam_avg + lam_hat) / (t + 2)
        x_avg = ((t + 1) * x_avg + x_cur) / (t + 2)
        rec.record(t, lam_avg, lam_hat, x_avg, grads)
    return rec.finish("dda_dual", p.sigma2)


def run_consensus_dual_subgrad(
    agents: CoupledProblem | Sequence[CoupledAgentSpec],
    topology: Topology | WeightMatrix,
    kind: BaselineKind,
    lambda0=None,
    rounds: int = 1000,
    step_scale: float = 1.0,
) -> DualTrace:
    """Consensus-based projected dual subgradient with primal running averages.

    ``step_scale = 0`` turns the method into pure consensus on ``lam``.
    """
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    if kind.tag == "dda":
        raise ParameterError("use run_dda_dual for dual averaging")
    problem = as_problem(agents)
    p = as_weights(topology)
    state, _ = init_dual(problem, lambda0)
    lam = state.lam.copy()
    x_cur, grads = problem.grad_psi(lam)
    x_avg = x_cur.copy()
    rec = DualRecorder(problem, rounds, float(np.linalg.norm(grads, axis=1).max()))
    for t in range(rounds):
        lam = np.maximum(p.mix(lam) - step_scale * kind.step(t) * grads, 0.0)
        x_cur, grads = problem.grad_psi(lam)
        x_avg = ((t + 1) * x_avg + x_cur) / (t + 2)
        rec.record(t, lam, None, x_avg, grads)
    name = "consensus_decaying" if kind.tag == "consensus_subgrad_decaying" else "consensus_constant"
    return rec.finish(name, p.sigma2, has_hat=False)
