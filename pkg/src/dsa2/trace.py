"""In-memory run traces and the flat per-(round, agent) record type."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRACE_SCHEMA = "dsa2-trace/1"


@dataclass(eq=False)
class PrimalTrace:
    """History of a run on the coupled-cost problem ``min (1/n) sum_i f_i``.

    Arrays are indexed by position ``k`` with round ``t[k] = k + 1``.
    ``x`` is the test point each agent reports: the running average for
    DSA2, and the ergodic average of ``x_hat`` for dual averaging.
    """

    algorithm: str
    t: np.ndarray
    x: np.ndarray          # (T, n, m)
    x_hat: np.ndarray      # (T, n, m)
    f_values: np.ndarray   # (T, n) network objective at each agent's x
    s_dev: np.ndarray      # (T, n) ||s_i - g||_* tracking error
    x0: np.ndarray
    lipschitz: float
    sigma2: float
    norm: str = "l2_l2"

    @property
    def rounds(self) -> int:
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]


@dataclass(eq=False)
class DualTrace:
    """History of a run on the dual of the constraint-coupled problem.

    ``grad_norm_max[k]`` is ``max_j ||grad psi_j||_2`` at round ``k``
    (``k = 0..T``), so ``D = grad_norm_max.max() ** 2``.
    """

    algorithm: str
    t: np.ndarray
    lam: np.ndarray            # (T, n, m) dual test points
    lam_hat: np.ndarray | None  # (T, n, m) prox outputs (None for primal-type baselines)
    x_avg: np.ndarray          # (T, n, mi) recovered primal running averages
    dual_values: np.ndarray    # (T, n) sum_j psi_j(lam_i)
    mean_dual_value: np.ndarray  # (T,) sum_j psi_j(mean_i lam_i)
    primal_value: np.ndarray   # (T,) sum_j f_j(x_avg_j)
    constraint: np.ndarray     # (T, m) sum_j h_j(x_avg_j)
    grad_norm_max: np.ndarray  # (T + 1,)
    sigma2: float
    extras: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.t)

    @property
    def n(self) -> int:
        return self.lam.shape[1]

    @property
    def measured_D(self) -> float:
        return float(self.grad_norm_max.max() ** 2)


@dataclass
class TraceRecord:
    """One CSV row: one agent at one round.

    Fields that do not apply to the run kind stay ``None`` and are written
    as empty cells.
    """

    algorithm: str
    t: int
    agent: int
    iterate: tuple[float, ...]
    obj_err: float | None = None
    diameter: float | None = None
    s_dev: float | None = None
    dual_err: float | None = None
    penalty: float | None = None
    primal_err: float | None = None
    primal_err_abs: float | None = None
    x_avg: tuple[float, ...] = ()
    bounds: dict[str, float] = field(default_factory=dict)
