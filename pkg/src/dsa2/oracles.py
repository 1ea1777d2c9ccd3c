"""Independent ground truth: centralized double averaging, exact dual bisection
for the charging family, and exhaustive grid search."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .convex import FeasibleSet, LocalObjective, ProxSetup, prox_map
from .engine import GammaSchedule
from .errors import InfeasibleError, ParameterError

BISECTION_GTOL = 1e-10
BISECTION_XTOL = 1e-12
GRID_BUDGET = 2_000_000


@dataclass
class GroundTruth:
    x_star: np.ndarray
    f_star: float
    lambda_star: np.ndarray | None = None
    kkt_residual: float = float("nan")  # NaN when no multiplier is involved


@dataclass(eq=False)
class CentralTrace:
    x: np.ndarray      # (T, m) running averages, rounds 1..T
    x_hat: np.ndarray  # (T, m)


def centralized_sa2(objective: LocalObjective | Sequence[LocalObjective], setup: ProxSetup,
                    sched: GammaSchedule, x0=None, rounds: int = 1000) -> CentralTrace:
    """Single-machine double averaging on ``f = mean_i f_i``.

    Kept deliberately separate from the distributed engine: the accumulated
    subgradient is summed directly instead of being tracked.
    """
    if rounds < 1:
        raise ParameterError("rounds must be >= 1")
    objs = [objective] if isinstance(objective, LocalObjective) else list(objective)

    def grad(x):
        return sum(np.asarray(o.subgrad(x), dtype=float) for o in objs) / len(objs)

    x = setup.anchor.copy() if x0 is None else np.asarray(x0, dtype=float).reshape(setup.m).copy()
    acc = grad(x)
    xs = np.empty((rounds, setup.m))
    xh = np.empty((rounds, setup.m))
    for t in range(rounds):
        x_hat = prox_map(acc, sched(t), setup)
        x = (t + 1) / (t + 2) * x + x_hat / (t + 2)
        acc = acc + grad(x)
        xs[t], xh[t] = x, x_hat
    return CentralTrace(xs, xh)


def _charging_g(lam: float, c, d, b) -> float:
    x = np.clip(lam * d / c - 1.0, 0.0, 1.0)
    return b - float(np.sum(d * np.log1p(x)))


def charging_kkt_residual(lam: float, c, d, b) -> float:
    """Worst KKT violation of ``x(lam)`` and ``lam`` for the charging family.

    Stationarity of ``-c_i x + lam d_i log(1 + x)`` on ``[0, 1]`` (zero slope
    inside, correct sign at a clamped end), primal feasibility and
    complementary slackness.
    """
    c, d = np.asarray(c, float), np.asarray(d, float)
    x = np.clip(lam * d / c - 1.0, 0.0, 1.0)
    slope = -c + lam * d / (1.0 + x)
    at_lo = x <= 0.0
    at_hi = x >= 1.0
    inner = ~(at_lo | at_hi)
    stat = np.zeros_like(x)
    stat[inner] = np.abs(slope[inner])
    stat[at_lo] = np.maximum(slope[at_lo], 0.0)
    stat[at_hi] = np.maximum(-slope[at_hi], 0.0)
    g = _charging_g(lam, c, d, b)
    return float(max(stat.max(initial=0.0), max(g, 0.0), abs(lam * g)))


def solve_example_dual_bisection(c, d, b: float) -> GroundTruth:
    """Optimal multiplier of the charging family by bisection on the constraint slack.

    ``g(lam) = b - sum_i d_i log(1 + x_i(lam))`` is non-increasing because each
    maximizer ``x_i(lam)`` is non-decreasing in ``lam``.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if np.any(c <= 0) or np.any(d <= 0):
        raise ParameterError("need c_i > 0 and d_i > 0")
    if float(np.sum(d)) * math.log(2.0) < b:
        raise InfeasibleError(f"sum d_i log 2 = {np.sum(d) * math.log(2.0):.6g} < b = {b}")
    if _charging_g(0.0, c, d, b) <= 0:
        lam = 0.0
    else:
        lo, hi = 0.0, 1.0
        while _charging_g(hi, c, d, b) > 0:
            lo, hi = hi, 2.0 * hi
        lam = hi
        while hi - lo > BISECTION_XTOL:
            mid = 0.5 * (lo + hi)
            g = _charging_g(mid, c, d, b)
            if abs(g) <= BISECTION_GTOL:
                lam = mid
                break
            if g > 0:
                lo = mid
            else:
                hi = mid
            lam = hi
    x = np.clip(lam * d / c - 1.0, 0.0, 1.0)
    return GroundTruth(x, float(c @ x), np.array([lam]), charging_kkt_residual(lam, c, d, b))


def _grid_axis(lo: float, hi: float, h: float) -> np.ndarray:
    """Multiples of ``h`` inside ``[lo, hi]`` plus both endpoints (so 0 is hit when inside)."""
    k0, k1 = math.ceil(lo / h - 1e-9), math.floor(hi / h + 1e-9)
    inner = np.arange(k0, k1 + 1) * h
    inner = inner[(inner > lo) & (inner < hi)]
    return np.unique(np.concatenate([[lo], inner, [hi]]))


def _grid_points(axes: list[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=-1)


def multilevel_grid_min(F: Callable[[np.ndarray], np.ndarray], lo, hi, resolution: float,
                        budget: int = GRID_BUDGET, refine: int = 4, halfwidth: int = 3):
    """Exhaustive grid minimization of ``F`` over the box ``[lo, hi]``.

    When a grid at ``resolution`` fits in ``budget`` points it is searched in
    one pass.  Otherwise a coarse full grid is searched first and each next
    level exhaustively searches a window of ``halfwidth`` coarse cells around
    the incumbent with spacing divided by ``refine``, down to ``resolution``.
    The final level is exact to the grid for convex ``F``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    k = lo.shape[0]
    width = float(np.max(hi - lo))
    per_dim = max(int(budget ** (1.0 / k)), 3)
    h = max(resolution, width / (per_dim - 1)) if width > 0 else resolution
    axes = [_grid_axis(lo[i], hi[i], h) for i in range(k)]
    pts = _grid_points(axes)
    vals = F(pts)
    j = int(np.argmin(vals))
    best_x, best_f = pts[j].copy(), float(vals[j])
    while h > resolution * (1 + 1e-12):
        h_new = max(h / refine, resolution)
        reach = halfwidth * h
        while True:
            wlo = np.maximum(lo, best_x - reach)
            whi = np.minimum(hi, best_x + reach)
            axes = [_grid_axis(wlo[i], whi[i], h_new) for i in range(k)]
            pts = _grid_points(axes)
            vals = F(pts)
            j = int(np.argmin(vals))
            if not vals[j] < best_f:
                break
            best_x, best_f = pts[j].copy(), float(vals[j])
            # a winner near an inner window edge means the minimum may lie outside: slide
            on_edge = ((best_x <= wlo + h) & (wlo > lo)) | ((best_x >= whi - h) & (whi < hi))
            if not np.any(on_edge):
                break
        h = h_new
    return best_x, best_f


def brute_force_min(objective: Callable[[np.ndarray], np.ndarray], feasible: FeasibleSet,
                    resolution: float) -> GroundTruth:
    """Grid minimum of a vectorized objective over a box or l2 ball with ``m <= 2``.

    Accurate to about ``L * resolution * sqrt(m)`` for an ``L``-Lipschitz
    objective.  A square grid only approximates a circle by a staircase, so
    for the disc the boundary circle is also scanned exhaustively at arc
    spacing ``resolution`` and the better candidate kept.
    """
    if feasible.m > 2:
        raise ParameterError("brute force supports dimension <= 2 only")
    if feasible.kind == "box":
        lo, hi = feasible.lo, feasible.hi
        F = objective
    elif feasible.kind == "l2_ball":
        r = feasible.radius
        lo, hi = np.full(feasible.m, -r), np.full(feasible.m, r)

        def F(pts):
            vals = np.asarray(objective(pts), dtype=float)
            return np.where(np.linalg.norm(pts, axis=-1) <= r, vals, np.inf)
    else:
        raise ParameterError(f"brute force needs a box or ball, got {feasible.kind}")
    x, f = multilevel_grid_min(lambda p: np.asarray(F(p), dtype=float), lo, hi, resolution)
    if feasible.kind == "l2_ball" and feasible.m == 2:
        theta = np.linspace(-math.pi, math.pi, math.ceil(2 * math.pi * r / resolution) + 1)
        ring = r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        vals = np.asarray(objective(ring), dtype=float)
        j = int(np.argmin(vals))
        if vals[j] < f:
            x, f = ring[j], float(vals[j])
    return GroundTruth(x, f)


def brute_force_charging(c, d, b: float, resolution: float = 1e-7) -> GroundTruth:
    """Grid search on the primal charging problem, independent of any multiplier.

    One coordinate ``x_e`` is eliminated exactly: given the others, the
    cheapest feasible choice is the smallest ``x_e`` meeting the coupled
    constraint.  The remaining ``n - 1`` coordinates are searched on a grid.
    Every choice of ``e`` is tried and the best kept; when the eliminated
    coordinate sits at a bound the constraint surface runs between grid
    points, and some other choice of ``e`` avoids that.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    n = c.shape[0]
    if n > 5:
        raise ParameterError("brute force is limited to n <= 5")

    if n == 1:
        def F(pts):
            x = pts[:, 0]
            return np.where(d[0] * np.log1p(x) >= b, c[0] * x, np.inf)

        x, f = multilevel_grid_min(F, np.zeros(1), np.ones(1), resolution)
        if not np.isfinite(f):
            raise InfeasibleError("instance is infeasible")
        return GroundTruth(x, f)

    best_x, best_f = None, np.inf
    for e in range(n):
        rest = np.arange(n) != e

        def completion(rest_util, e=e):
            xe = np.expm1(np.maximum(b - rest_util, 0.0) / d[e])
            return np.where(xe <= 1.0, xe, np.inf)

        def F(pts, e=e, rest=rest, completion=completion):
            return pts @ c[rest] + c[e] * completion(np.log1p(pts) @ d[rest])

        x_rest, f = multilevel_grid_min(F, np.zeros(n - 1), np.ones(n - 1), resolution)
        if f < best_f:
            x = np.empty(n)
            x[rest] = x_rest
            x[e] = completion(np.array([np.log1p(x_rest) @ d[rest]]))[0]
            best_x, best_f = x, f
    if not np.isfinite(best_f):
        raise InfeasibleError("instance is infeasible")
    return GroundTruth(best_x, float(best_f))
