"""Norm pairs, feasible sets, prox-functions and the closed-form prox-mapping.

The prox-mapping solves ``argmin_{x in X} <z, x> + gamma * d(x)``.  All
functions act on the last axis, so a stack of agent vectors of shape
``(n, m)`` is handled in one call.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError

SET_KINDS = ("nonneg_orthant", "box", "simplex", "l2_ball")
PROX_KINDS = ("quadratic", "entropic")


@dataclass(frozen=True)
class NormPair:
    """A primal norm and its exact dual: ``l2_l2`` or ``l1_linf``."""

    tag: str

    def __post_init__(self):
        if self.tag not in ("l2_l2", "l1_linf"):
            raise ParameterError(f"unknown norm pair {self.tag!r}")

    def primal(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.tag == "l2_l2":
            return np.linalg.norm(v, axis=-1)
        return np.abs(v).sum(axis=-1)

    def dual(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.tag == "l2_l2":
            return np.linalg.norm(v, axis=-1)
        return np.abs(v).max(axis=-1, initial=0.0)


L2 = NormPair("l2_l2")
L1_LINF = NormPair("l1_linf")


def dual_norm_of(v, norm: NormPair) -> float:
    return float(norm.dual(v))


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Closed convex set descriptor.

    Use the constructors :func:`nonneg_orthant`, :func:`box`, :func:`simplex`
    and :func:`l2_ball` rather than building one directly.
    """

    kind: str
    m: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    radius: float | None = None

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.m or not np.all(np.isfinite(x)):
            return False
        if self.kind == "nonneg_orthant":
            return bool(np.all(x >= -tol))
        if self.kind == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.kind == "simplex":
            return bool(np.all(x >= -tol) and np.all(np.abs(x.sum(axis=-1) - 1.0) <= tol * max(1, self.m)))
        return bool(np.all(np.linalg.norm(x, axis=-1) <= self.radius * (1 + tol) + tol))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Random points of the set (orthant draws are exponential)."""
        if self.kind == "nonneg_orthant":
            return rng.exponential(1.0, size=(size, self.m))
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi, size=(size, self.m))
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(self.m), size=size)
        g = rng.standard_normal((size, self.m))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        r = self.radius * rng.random(size) ** (1.0 / self.m)
        return g * r[:, None]


def nonneg_orthant(m: int) -> FeasibleSet:
    return FeasibleSet("nonneg_orthant", int(m))


def box(lo, hi) -> FeasibleSet:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    if np.any(lo > hi):
        raise ParameterError("box needs lo <= hi")
    return FeasibleSet("box", lo.shape[0], lo.copy(), hi.copy())


def simplex(m: int) -> FeasibleSet:
    if m < 1:
        raise ParameterError("simplex dimension must be >= 1")
    return FeasibleSet("simplex", int(m))


def l2_ball(m: int, radius: float) -> FeasibleSet:
    if radius <= 0:
        raise ParameterError("ball radius must be positive")
    return FeasibleSet("l2_ball", int(m), radius=float(radius))


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex along the last axis."""
    y = np.asarray(y, dtype=float)
    m = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ks = np.arange(1, m + 1)
    cond = u - css / ks > 0
    rho = m - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True, eq=False)
class ProxSetup:
    """Feasible set, prox-function and norm pair used by the prox step.

    Supported pairings: quadratic ``d`` with every set kind, entropic ``d``
    with the simplex only.  ``d`` is always shifted so it vanishes at
    :attr:`anchor`: the origin for orthant, box and ball, the barycenter for
    the simplex.  Quadratic ``d`` is paired with ``l2_l2``, entropic with
    ``l1_linf``; those are the norms in which each is 1-strongly convex.
    """

    set: FeasibleSet
    d: str = "quadratic"
    norm: NormPair | None = None

    def __post_init__(self):
        if self.d not in PROX_KINDS:
            raise ConfigurationError(f"unknown prox-function {self.d!r}")
        if self.d == "entropic" and self.set.kind != "simplex":
            raise ConfigurationError("entropic prox-function requires the simplex")
        expected = L2 if self.d == "quadratic" else L1_LINF
        if self.norm is None:
            object.__setattr__(self, "norm", expected)
        elif self.norm.tag != expected.tag:
            raise ConfigurationError(f"{self.d} prox-function is paired with {expected.tag}, not {self.norm.tag}")
        if self.set.kind == "box" and (np.any(self.set.lo > 0) or np.any(self.set.hi < 0)):
            raise ConfigurationError("box must contain the origin (translate the problem first)")

    @property
    def m(self) -> int:
        return self.set.m

    @property
    def anchor(self) -> np.ndarray:
        if self.set.kind == "simplex":
            return np.full(self.m, 1.0 / self.m)
        return np.zeros(self.m)

    def d_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == "entropic":
            with np.errstate(divide="ignore", invalid="ignore"):
                xlogx = np.where(x > 0, x * np.log(x), 0.0)
            return xlogx.sum(axis=-1) + np.log(self.m)
        return 0.5 * np.sum((x - self.anchor) ** 2, axis=-1)

    def d_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == "entropic":
            return np.log(x) + 1.0
        return x - self.anchor

    def max_d(self) -> float:
        """``max_{x in X} d(x)``, attained at an extreme point."""
        s = self.set
        if s.kind == "nonneg_orthant":
            return float("inf")
        if s.kind == "box":
            return float(0.5 * np.sum(np.maximum(s.lo**2, s.hi**2)))
        if s.kind == "l2_ball":
            return 0.5 * s.radius**2
        if self.d == "entropic":
            return float(np.log(s.m))
        return 0.5 * (1.0 - 1.0 / s.m)


def prox_map(z, gamma: float, setup: ProxSetup) -> np.ndarray:
    """Closed-form ``argmin_{x in X} <z, x> + gamma d(x)``."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != setup.m:
        raise ParameterError(f"z has dimension {z.shape[-1]}, set has {setup.m}")
    kind = setup.set.kind
    if setup.d == "entropic":
        a = -z / gamma
        a = a - a.max(axis=-1, keepdims=True)
        e = np.exp(a)
        return e / e.sum(axis=-1, keepdims=True)
    y = setup.anchor - z / gamma
    if kind == "nonneg_orthant":
        return np.maximum(y, 0.0)
    if kind == "box":
        return np.clip(y, setup.set.lo, setup.set.hi)
    if kind == "l2_ball":
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        scale = np.where(r > setup.set.radius, setup.set.radius / np.where(r > 0, r, 1.0), 1.0)
        return y * scale
    return project_simplex(y)


@dataclass(frozen=True, eq=False)
class LocalObjective:
    """Private cost of one agent.

    ``value`` and ``subgrad`` should broadcast over leading axes of ``x``;
    ``lipschitz_bound`` bounds the dual norm of every subgradient on the set.
    """

    value: Callable[[np.ndarray], np.ndarray]
    subgrad: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: float


def make_abs_linear_objective(a, norm: NormPair = L2) -> LocalObjective:
    """``f(x) = |<a, x>|`` with subgradient ``sign(<a, x>) a`` and ``sign(0) = 0``."""
    a = np.asarray(a, dtype=float).copy()
    if not np.all(np.isfinite(a)):
        raise ParameterError("a must be finite")

    def value(x):
        return np.abs(np.asarray(x, dtype=float) @ a)

    def subgrad(x):
        return np.sign(np.asarray(x, dtype=float) @ a)[..., None] * a

    return LocalObjective(value, subgrad, float(norm.dual(a)))
