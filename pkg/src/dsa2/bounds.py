"""Closed-form convergence bounds and per-round error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .convex import NormPair
from .errors import ParameterError
from .oracles import GroundTruth
from .trace import DualTrace, PrimalTrace


@dataclass(frozen=True)
class BoundParams:
    """Constants entering the bounds.

    ``R2`` bounds ``d(x*)``; ``D`` is the squared bound on dual subgradients;
    ``C = sum_j f_j* - min_X sum_j f_j``.
    """

    n: int
    sigma2: float
    gamma: float
    L: float = 0.0
    R2: float = 0.0
    D: float = 0.0
    lambda_star_norm: float = 0.0
    C: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if not 0 <= self.sigma2 < 1:
            raise ParameterError(f"sigma2 must lie in [0, 1), got {self.sigma2}")
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")
        for name in ("L", "R2", "D", "lambda_star_norm", "C"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    @property
    def network_factor(self) -> float:
        """``sqrt(n) / (1 - sigma2)``."""
        return math.sqrt(self.n) / (1.0 - self.sigma2)


def theorem1_bound(t, p: BoundParams):
    """Non-ergodic objective-error bound of DSA2 with ``gamma_t = gamma sqrt(t+1)``."""
    t = np.asarray(t, dtype=float)
    L2 = p.L ** 2
    return ((6 * L2 * p.network_factor + 13 * L2) / p.gamma + p.gamma * p.R2) / np.sqrt(t + 1)


class DualBounds(NamedTuple):
    dual_err: np.ndarray
    penalty: np.ndarray
    primal_hi: np.ndarray
    primal_lo: np.ndarray


def theorem2_bounds(t, p: BoundParams) -> DualBounds:
    """Dual error, quadratic penalty and primal sandwich for the dual decomposition."""
    t = np.asarray(t, dtype=float)
    root = np.sqrt(t + 1)
    nf, n, D, g = p.network_factor, p.n, p.D, p.gamma
    dual_err = 2 * n * (3 * nf + 6.5) * D / (g * root) + g * p.lambda_star_norm ** 2 / (2 * root)
    penalty = 4 * n * (nf + 2.5) * D / (t + 1) + 2 * g * p.C / root
    primal_hi = 2 * n * (nf + 2.5) * D / (g * root)
    primal_lo = -p.lambda_star_norm * np.sqrt(penalty)
    return DualBounds(dual_err, penalty, primal_hi, primal_lo)


def disagreement_bound(p: BoundParams) -> float:
    """Uniform bound on ``||z_i - sum_k g_k||_*`` for the subgradient tracker."""
    return math.sqrt(p.n) * p.L / (1.0 - p.sigma2) + 2 * p.L


def consensus_diameter(points: np.ndarray, ord_fn=None) -> np.ndarray:
    """``max_{i,j} ||p_i - p_j||`` for a stack of shape ``(T, n, m)``; l2 by default."""
    T, n, _ = points.shape
    out = np.zeros(T)
    for i in range(n - 1):
        diff = points[:, i + 1:, :] - points[:, i:i + 1, :]
        norms = ord_fn(diff) if ord_fn is not None else np.linalg.norm(diff, axis=-1)
        out = np.maximum(out, norms.max(axis=1))
    return out


@dataclass(eq=False)
class Metrics:
    """Per-round error columns; arrays of shape ``(T, n)`` are per agent."""

    t: np.ndarray
    diameter: np.ndarray
    obj_err: np.ndarray | None = None
    s_dev: np.ndarray | None = None
    dual_err: np.ndarray | None = None
    penalty: np.ndarray | None = None
    primal_err: np.ndarray | None = None
    weak_duality_gap: np.ndarray | None = None


def measure_metrics(trace: PrimalTrace | DualTrace, truth: GroundTruth) -> Metrics:
    """Error metrics of a run against a ground truth.

    Primal runs: objective error of each agent's test point, consensus
    diameter and tracking deviation.  Dual runs: per-agent dual error
    ``sum_j psi_j(lam_i) + f*`` (strong duality gives ``sum_j psi_j(lam*) = -f*``),
    quadratic penalty ``||(sum_j h_j(x_j))_+||^2``, primal error and the
    weak-duality slack ``-sum_j psi_j(mean lam) - f*`` (never positive).
    """
    if isinstance(trace, PrimalTrace):
        norm = NormPair(trace.norm)
        return Metrics(
            t=trace.t,
            diameter=consensus_diameter(trace.x, norm.primal),
            obj_err=trace.f_values - truth.f_star,
            s_dev=trace.s_dev,
        )
    return Metrics(
        t=trace.t,
        diameter=consensus_diameter(trace.lam),
        dual_err=trace.dual_values + truth.f_star,
        penalty=np.sum(np.maximum(trace.constraint, 0.0) ** 2, axis=1),
        primal_err=trace.primal_value - truth.f_star,
        weak_duality_gap=-trace.mean_dual_value - truth.f_star,
    )


def loglog_slope(t, err) -> float:
    """Least-squares slope of ``log err`` against ``log t`` over positive entries."""
    t = np.asarray(t, dtype=float)
    err = np.abs(np.asarray(err, dtype=float))
    mask = (t > 0) & (err > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[mask]), np.log(err[mask]), 1)[0])
