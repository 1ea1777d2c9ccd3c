"""DSA2 applied to the Lagrangian dual of a constraint-coupled problem.

Primal problem::

    min  sum_i f_i(x_i)   s.t.  sum_i h_i(x_i) <= 0,   x_i in X_i (boxes)

Agent ``i`` owns ``psi_i(lam) = max_{x in X_i} -f_i(x) - <lam, h_i(x)>``,
whose subgradient is ``-h_i(x_i(lam))`` for any inner maximizer (Danskin).
The agents run DSA2 on ``min_{lam >= 0} sum_i psi_i(lam)`` with the
quadratic prox-function on the orthant, and recover primal points as running
averages of the inner maximizers.  Any constant share of the coupled
right-hand side (``b/n`` in the charging example) lives inside ``h_i``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .convex import ProxSetup, nonneg_orthant, prox_map
from .engine import GammaSchedule, as_weights
from .errors import ParameterError
from .rng import STREAM_INSTANCE, make_rng
from .topology import Topology, WeightMatrix
from .trace import DualTrace
from .tracking import TrackerState, init_tracking, tracking_step

GOLDEN_TOL = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_argmax(phi: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Maximizer of a concave scalar function on ``[lo, hi]``."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = phi(d)
    best = 0.5 * (a + b)
    # The maximum of a concave function may sit on an endpoint.
    candidates = [(phi(best), best), (phi(float(lo)), float(lo)), (phi(float(hi)), float(hi))]
    return max(candidates, key=lambda pair: pair[0])[1]


@dataclass(frozen=True, eq=False)
class CoupledAgentSpec:
    """One agent of the coupled problem.

    ``inner_argmax`` maps ``lam`` to a maximizer of ``-f(x) - <lam, h(x)>``
    over the box ``[lo, hi]``.  When it is omitted and ``X_i`` is scalar, a
    golden-section search is used instead.
    """

    f: Callable[[np.ndarray], float]
    h: Callable[[np.ndarray], np.ndarray]
    lo: np.ndarray
    hi: np.ndarray
    inner_argmax: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=float)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=float)))
        if self.inner_argmax is None and self.lo.shape != (1,):
            raise ParameterError("golden-section fallback needs a scalar X_i; supply inner_argmax")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def argmax(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if self.inner_argmax is not None:
            return np.atleast_1d(np.asarray(self.inner_argmax(lam), dtype=float))

        def phi(x):
            xv = np.array([x])
            return -float(self.f(xv)) - float(np.dot(lam, np.atleast_1d(self.h(xv))))

        return np.array([golden_section_argmax(phi, self.lo[0], self.hi[0])])

    def lagrangian_value(self, x, lam) -> float:
        """``-f(x) - <lam, h(x)>``, the inner objective."""
        return -float(self.f(x)) - float(np.dot(lam, np.atleast_1d(self.h(x))))


def psi_eval(agent: CoupledAgentSpec, lam) -> tuple[float, np.ndarray]:
    """Dual value ``psi_i(lam)`` and Danskin subgradient ``-h_i(x_i(lam))``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam < 0):
        raise ParameterError("lambda must be componentwise non-negative")
    x = agent.argmax(lam)
    hx = np.atleast_1d(np.asarray(agent.h(x), dtype=float))
    return -float(agent.f(x)) - float(lam @ hx), -hx


def example_inner_argmax(c_i: float, d_i: float, lam: float) -> float:
    """Maximizer over ``[0, 1]`` of ``-c x + lam d log(1 + x)``.

    The first-order condition ``-c + lam d / (1 + x) = 0`` gives
    ``x = lam d / c - 1``, clipped to the interval.
    """
    if not (c_i > 0 and d_i > 0):
        raise ParameterError("analytic oracle needs c_i > 0 and d_i > 0")
    return min(max(lam * d_i / c_i - 1.0, 0.0), 1.0)


class CoupledProblem:
    """All agents of a coupled problem, evaluated as a batch.

    Row ``i`` of every array belongs to agent ``i``.  Subclasses override the
    batched methods when a vectorized form exists.
    """

    n: int
    m: int
    dim: int

    def argmax(self, lam: np.ndarray) -> np.ndarray:
        """``(n, dim)`` inner maximizers, agent ``i`` evaluated at ``lam[i]``."""
        raise NotImplementedError

    def f(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def psi_table(self, lams: np.ndarray) -> np.ndarray:
        """``out[k, j] = psi_j(lams[k])``."""
        raise NotImplementedError

    def grad_psi(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Inner maximizers and Danskin subgradients for each agent at its own ``lam[i]``."""
        x = self.argmax(lam)
        return x, -self.h(x)

    def unconstrained_min(self) -> float:
        """``min_{x in X} sum_j f_j``, reached at the maximizers for ``lam = 0``."""
        x = self.argmax(np.zeros((self.n, self.m)))
        return float(self.f(x).sum())


class AgentSet(CoupledProblem):
    """Batch wrapper around a list of :class:`CoupledAgentSpec`."""

    def __init__(self, agents: Sequence[CoupledAgentSpec], m: int | None = None):
        if not agents:
            raise ParameterError("need at least one agent")
        self.agents = list(agents)
        self.n = len(self.agents)
        dims = {a.dim for a in self.agents}
        if len(dims) != 1:
            raise ParameterError("all agents must share the local dimension")
        self.dim = dims.pop()
        if m is None:
            m = np.atleast_1d(self.agents[0].h(self.agents[0].lo)).shape[0]
        self.m = int(m)

    def argmax(self, lam):
        return np.stack([a.argmax(lam[i]) for i, a in enumerate(self.agents)])

    def f(self, x):
        return np.array([float(a.f(x[i])) for i, a in enumerate(self.agents)])

    def h(self, x):
        return np.stack([np.atleast_1d(np.asarray(a.h(x[i]), dtype=float)) for i, a in enumerate(self.agents)])

    def psi_table(self, lams):
        lams = np.atleast_2d(lams)
        out = np.empty((lams.shape[0], self.n))
        for j, a in enumerate(self.agents):
            for k, lam in enumerate(lams):
                out[k, j] = a.lagrangian_value(a.argmax(lam), lam)
        return out


class ChargingProblem(CoupledProblem):
    """Resource-allocation family with logarithmic utility.

    ``min sum_i c_i x_i`` over ``x_i in [0, 1]`` subject to
    ``sum_i d_i log(1 + x_i) >= b``; agent ``i`` carries
    ``h_i(x) = b/n - d_i log(1 + x)``.
    """

    def __init__(self, c, d, b: float):
        c = np.asarray(c, dtype=float).reshape(-1)
        d = np.asarray(d, dtype=float).reshape(-1)
        if c.shape != d.shape:
            raise ParameterError("c and d must have the same length")
        if np.any(c <= 0) or np.any(d <= 0):
            raise ParameterError("analytic oracle needs c_i > 0 and d_i > 0")
        self.c, self.d, self.b = c, d, float(b)
        self.n, self.m, self.dim = c.shape[0], 1, 1

    def argmax(self, lam):
        lam = np.asarray(lam, dtype=float).reshape(self.n, 1)
        return np.clip(lam * (self.d / self.c)[:, None] - 1.0, 0.0, 1.0)

    def f(self, x):
        return self.c * np.asarray(x).reshape(self.n)

    def h(self, x):
        x = np.asarray(x).reshape(self.n)
        return (self.b / self.n - self.d * np.log1p(x))[:, None]

    def psi_table(self, lams):
        lam = np.asarray(lams, dtype=float).reshape(-1, 1)
        x = np.clip(lam * (self.d / self.c) - 1.0, 0.0, 1.0)
        return -self.c * x - lam * (self.b / self.n - self.d * np.log1p(x))

    def unconstrained_min(self):
        return 0.0

    def agents(self) -> list[CoupledAgentSpec]:
        out = []
        share = self.b / self.n
        for ci, di in zip(self.c, self.d):
            out.append(CoupledAgentSpec(
                f=lambda x, ci=ci: ci * float(np.asarray(x).reshape(-1)[0]),
                h=lambda x, di=di: np.array([share - di * math.log1p(float(np.asarray(x).reshape(-1)[0]))]),
                lo=[0.0],
                hi=[1.0],
                inner_argmax=lambda lam, ci=ci, di=di: np.array([example_inner_argmax(ci, di, float(lam[0]))]),
            ))
        return out


def random_charging(n: int, seed: int, b: float = 5.0, low: float = 0.0, high: float = 1.0,
                    floor: float = 0.1) -> ChargingProblem:
    """``c_i, d_i ~ U(low, high)`` clipped below at ``floor``."""
    rng = make_rng(seed, STREAM_INSTANCE)
    c = np.maximum(rng.uniform(low, high, n), floor)
    d = np.maximum(rng.uniform(low, high, n), floor)
    return ChargingProblem(c, d, b)


def as_problem(agents: CoupledProblem | Sequence[CoupledAgentSpec]) -> CoupledProblem:
    return agents if isinstance(agents, CoupledProblem) else AgentSet(agents)


DUAL_SETUP_CACHE: dict[int, ProxSetup] = {}


def orthant_setup(m: int) -> ProxSetup:
    if m not in DUAL_SETUP_CACHE:
        DUAL_SETUP_CACHE[m] = ProxSetup(nonneg_orthant(m), "quadratic")
    return DUAL_SETUP_CACHE[m]


@dataclass(frozen=True, eq=False)
class DualState:
    lam: np.ndarray      # (n, m) running averages lambda_{i,t}
    lam_hat: np.ndarray  # (n, m)
    x_cur: np.ndarray    # (n, dim) x_i(lambda_{i,t})
    x_avg: np.ndarray    # (n, dim) primal recovery
    t: int


class DualRecorder:
    """Collects per-round dual metrics into preallocated arrays."""

    def __init__(self, problem: CoupledProblem, rounds: int, grad_norm0: float):
        n, m, dim = problem.n, problem.m, problem.dim
        self.problem = problem
        self.lam = np.empty((rounds, n, m))
        self.lam_hat = np.empty((rounds, n, m))
        self.x_avg = np.empty((rounds, n, dim))
        self.dual_values = np.empty((rounds, n))
        self.mean_dual = np.empty(rounds)
        self.primal = np.empty(rounds)
        self.constraint = np.empty((rounds, m))
        self.grad_norm = np.empty(rounds + 1)
        self.grad_norm[0] = grad_norm0

    def record(self, k: int, lam, lam_hat, x_avg, grads) -> None:
        pr = self.problem
        self.lam[k] = lam
        if lam_hat is not None:
            self.lam_hat[k] = lam_hat
        self.x_avg[k] = x_avg
        self.dual_values[k] = pr.psi_table(lam).sum(axis=1)
        self.mean_dual[k] = pr.psi_table(lam.mean(axis=0, keepdims=True)).sum()
        self.primal[k] = pr.f(x_avg).sum()
        self.constraint[k] = pr.h(x_avg).sum(axis=0)
        self.grad_norm[k + 1] = np.linalg.norm(grads, axis=1).max()

    def finish(self, algorithm: str, sigma2: float, has_hat: bool = True, **extras) -> DualTrace:
        T = self.lam.shape[0]
        return DualTrace(
            algorithm=algorithm,
            t=np.arange(1, T + 1),
            lam=self.lam,
            lam_hat=self.lam_hat if has_hat else None,
            x_avg=self.x_avg,
            dual_values=self.dual_values,
            mean_dual_value=self.mean_dual,
            primal_value=self.primal,
            constraint=self.constraint,
            grad_norm_max=self.grad_norm,
            sigma2=sigma2,
            extras=extras,
        )


def init_dual(problem: CoupledProblem, lambda0=None) -> tuple[DualState, TrackerState]:
    n, m = problem.n, problem.m
    if lambda0 is None:
        lambda0 = np.zeros((n, m))
    lam0 = np.array(lambda0, dtype=float, ndmin=2).reshape(n, m)
    if np.any(lam0 < 0):
        raise ParameterError("lambda0 must be non-negative")
    x0, g0 = problem.grad_psi(lam0)
    return DualState(lam0.copy(), lam0.copy(), x0, x0.copy(), 0), init_tracking(g0)


def dd_round(
    states: DualState,
    tracker: TrackerState,
    agents: CoupledProblem | Sequence[CoupledAgentSpec],
    p: WeightMatrix,
    sched: GammaSchedule,
) -> tuple[DualState, TrackerState]:
    problem = as_problem(agents)
    if states.lam.shape != (problem.n, problem.m) or p.n != problem.n:
        raise ParameterError("agent count or dimension mismatch")
    t = states.t
    lam_hat = prox_map(tracker.z, sched(t), orthant_setup(problem.m))
    lam = ((t + 1) * states.lam + lam_hat) / (t + 2)
    x_cur, grads = problem.grad_psi(lam)
    x_avg = ((t + 1) * states.x_avg + x_cur) / (t + 2)
    tracker = tracking_step(tracker, p, grads)
    return DualState(lam, lam_hat, x_cur, x_avg, t + 1), tracker


def run_dual_decomp(
    agents: CoupledProblem | Sequence[CoupledAgentSpec],
    topology: Topology | WeightMatrix,
    sched: GammaSchedule,
    lambda0=None,
    rounds: int = 1000,
) -> DualTrace:
    """Run the dual decomposition for ``rounds`` rounds from ``lambda0`` (default zero)."""
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    problem = as_problem(agents)
    p = as_weights(topology)
    if p.n != problem.n:
        raise ParameterError(f"graph has {p.n} nodes but there are {problem.n} agents")
    state, tracker = init_dual(problem, lambda0)
    rec = DualRecorder(problem, rounds, float(np.linalg.norm(tracker.last_grad, axis=1).max()))
    for k in range(rounds):
        state, tracker = dd_round(state, tracker, problem, p, sched)
        rec.record(k, state.lam, state.lam_hat, state.x_avg, tracker.last_grad)
    return rec.finish("dsa2_dual", p.sigma2)
