"""Distributed subgradient method with double averaging (DSA2).

Per round each agent ``i``

1. minimizes its linear model plus prox term, ``x_hat = prox(z_i, gamma_t)``,
   where ``z_i`` accumulates the tracked subgradients;
2. folds ``x_hat`` into the running average ``x_i``;
3. evaluates its local subgradient at the new ``x_i`` and runs one
   tracking step.

The subgradient is taken at the running average, which is what makes the
test points themselves converge.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .convex import LocalObjective, ProxSetup, prox_map
from .errors import ParameterError
from .topology import Topology, WeightMatrix, metropolis_weights
from .trace import PrimalTrace
from .tracking import TrackerState, init_tracking, tracking_step


@dataclass(frozen=True)
class GammaSchedule:
    """Synchronized prox weights ``gamma_t``.

    Default rule ``gamma0 * sqrt(t + 1)``; a non-decreasing ``table`` of
    explicit values overrides it.
    """

    gamma0: float
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ParameterError(f"gamma0 must be positive, got {self.gamma0}")
        if self.table is not None:
            tab = tuple(float(g) for g in self.table)
            if not tab or tab[0] <= 0 or any(b < a for a, b in zip(tab, tab[1:])):
                raise ParameterError("gamma table must be positive and non-decreasing")
            object.__setattr__(self, "table", tab)

    def __call__(self, t: int) -> float:
        if t < 0:
            return self(0)  # gamma_{-1} := gamma_0
        if self.table is not None:
            if t >= len(self.table):
                raise ParameterError(f"gamma table has {len(self.table)} entries, round {t} requested")
            return self.table[t]
        return self.gamma0 * math.sqrt(t + 1)


@dataclass(frozen=True, eq=False)
class DSA2State:
    """Iterates of all agents, stacked by row."""

    x: np.ndarray      # (n, m) running averages x_{i,t}
    x_hat: np.ndarray  # (n, m) latest prox outputs
    t: int


def as_weights(topology: Topology | WeightMatrix) -> WeightMatrix:
    if isinstance(topology, WeightMatrix):
        return topology
    return metropolis_weights(topology)


def local_subgrads(problem: Sequence[LocalObjective], x: np.ndarray) -> np.ndarray:
    return np.stack([np.asarray(obj.subgrad(x[i]), dtype=float).reshape(-1) for i, obj in enumerate(problem)])


def network_objective(problem: Sequence[LocalObjective], points: np.ndarray) -> np.ndarray:
    """``(1/n) sum_j f_j`` evaluated at every row of ``points``."""
    total = np.zeros(points.shape[0])
    for obj in problem:
        total += obj.value(points)
    return total / len(problem)


def init_dsa2(problem: Sequence[LocalObjective], setup: ProxSetup, x0=None) -> tuple[DSA2State, TrackerState]:
    n = len(problem)
    if x0 is None:
        x0 = np.tile(setup.anchor, (n, 1))
    x0 = np.array(x0, dtype=float, ndmin=2)
    if x0.shape != (n, setup.m):
        raise ParameterError(f"x0 must have shape {(n, setup.m)}, got {x0.shape}")
    if not setup.set.contains(x0):
        raise ParameterError("initial points must lie in the feasible set")
    return DSA2State(x0.copy(), x0.copy(), 0), init_tracking(local_subgrads(problem, x0))


def dsa2_round(
    states: DSA2State,
    tracker: TrackerState,
    problem: Sequence[LocalObjective],
    setup: ProxSetup,
    p: WeightMatrix,
    sched: GammaSchedule,
) -> tuple[DSA2State, TrackerState]:
    n = len(problem)
    if states.x.shape != (n, setup.m) or tracker.s.shape != (n, setup.m) or p.n != n:
        raise ParameterError("agent count or dimension mismatch between states, tracker, problem and P")
    t = states.t
    x_hat = prox_map(tracker.z, sched(t), setup)
    x = ((t + 1) * states.x + x_hat) / (t + 2)
    tracker = tracking_step(tracker, p, local_subgrads(problem, x))
    return DSA2State(x, x_hat, t + 1), tracker


def run_dsa2(
    problem: Sequence[LocalObjective],
    setup: ProxSetup,
    topology: Topology | WeightMatrix,
    sched: GammaSchedule,
    x0=None,
    rounds: int = 1000,
    early_stop_tol: float | None = None,
) -> PrimalTrace:
    """Run DSA2 for ``rounds`` rounds and record every round.

    With ``early_stop_tol`` set, the run ends once both the consensus
    diameter and the change of the agents' mean objective fall below it.
    """
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    p = as_weights(topology)
    n, m = len(problem), setup.m
    if p.n != n:
        raise ParameterError(f"graph has {p.n} nodes but problem has {n} agents")
    state, tracker = init_dsa2(problem, setup, x0)
    x0 = state.x.copy()

    xs = np.empty((rounds, n, m))
    xh = np.empty((rounds, n, m))
    fv = np.empty((rounds, n))
    sd = np.empty((rounds, n))
    prev_mean = None
    T = rounds
    for k in range(rounds):
        state, tracker = dsa2_round(state, tracker, problem, setup, p, sched)
        xs[k], xh[k] = state.x, state.x_hat
        fv[k] = network_objective(problem, state.x)
        g = tracker.last_grad.mean(axis=0)
        sd[k] = setup.norm.dual(tracker.s - g)
        if early_stop_tol is not None:
            mean_f = fv[k].mean()
            diam = _diameter(state.x, setup)
            if prev_mean is not None and diam < early_stop_tol and abs(mean_f - prev_mean) < early_stop_tol:
                T = k + 1
                break
            prev_mean = mean_f
    return PrimalTrace(
        algorithm="dsa2",
        t=np.arange(1, T + 1),
        x=xs[:T],
        x_hat=xh[:T],
        f_values=fv[:T],
        s_dev=sd[:T],
        x0=x0,
        lipschitz=max(obj.lipschitz_bound for obj in problem),
        sigma2=p.sigma2,
        norm=setup.norm.tag,
    )


def _diameter(x: np.ndarray, setup: ProxSetup) -> float:
    diffs = x[:, None, :] - x[None, :, :]
    return float(setup.norm.primal(diffs).max())


def optimal_gamma(L: float, R: float, n: int, sigma2: float) -> float:
    """Prox weight minimizing the non-ergodic rate bound."""
    if not (L > 0 and R > 0):
        raise ParameterError("L and R must be positive")
    if not 0 <= sigma2 < 1:
        raise ParameterError(f"sigma2 must lie in [0, 1), got {sigma2}")
    return (L / R) * math.sqrt(6 * math.sqrt(n) / (1 - sigma2) + 13)
