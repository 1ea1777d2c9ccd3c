"""TOML run configuration: schema, loading and writing.

A config names one experiment kind, the communication graph, the prox
weight schedule, the round budget and the problem instance.  Every
randomized field needs an explicit seed.  Unknown keys are rejected.

Example::

    kind = "dsa2"
    rounds = 10

    [topology]
    kind = "path"
    n = 2

    [schedule]
    gamma0 = 1.0

    [instance]
    family = "abs_linear"
    m = 1
    seed = 0
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Annotated, Literal, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENT_KINDS = ("dsa2", "dual_decomp", "baseline", "reproduce_paper", "compare")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TopologyConfig(_Strict):
    """``single`` is the one-node graph; ``edgelist`` takes explicit ``edges``."""

    kind: Literal["single", "path", "cycle", "complete", "star", "small_world", "edgelist"]
    n: int = Field(ge=1)
    k: int | None = Field(default=None, ge=2)
    p_rewire: float | None = Field(default=None, ge=0.0, le=1.0)
    seed: int | None = Field(default=None, ge=0)
    edges: list[tuple[int, int]] | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "small_world":
            for name in ("k", "p_rewire", "seed"):
                if getattr(self, name) is None:
                    raise ValueError(f"small_world topology needs '{name}'")
        if self.kind == "edgelist" and self.edges is None:
            raise ValueError("edgelist topology needs 'edges'")
        if self.kind == "single" and self.n != 1:
            raise ValueError("single topology has n = 1")
        return self


class ScheduleConfig(_Strict):
    """``gamma_t = gamma0 * sqrt(t + 1)`` unless an explicit ``table`` is given."""

    gamma0: float = Field(gt=0.0)
    table: list[Annotated[float, Field(gt=0.0)]] | None = None


class AbsLinearInstance(_Strict):
    """``f_i(x) = |<a_i, x>|`` on a feasible set.

    ``a`` lists one row per agent; otherwise rows are drawn ``N(0, scale^2)``
    from ``seed``.  ``x0`` is the set's anchor, uniform random feasible
    points (from ``seed``) or one explicit row per agent.
    """

    family: Literal["abs_linear"]
    m: int = Field(ge=1)
    set: Literal["box", "l2_ball", "simplex", "nonneg_orthant"] = "box"
    prox: Literal["quadratic", "entropic"] = "quadratic"
    lo: float = -1.0
    hi: float = 1.0
    radius: float = Field(default=1.0, gt=0.0)
    a: list[list[float]] | None = None
    scale: float = Field(default=1.0, gt=0.0)
    seed: int | None = Field(default=None, ge=0)
    x0: Literal["anchor", "random"] | list[list[float]] = "anchor"

    @model_validator(mode="after")
    def _check(self):
        if (self.a is None or self.x0 == "random") and self.seed is None:
            raise ValueError("random abs_linear instance or x0 needs 'seed'")
        if isinstance(self.x0, list) and any(len(row) != self.m for row in self.x0):
            raise ValueError("every row of 'x0' must have length m")
        if self.a is not None and any(len(row) != self.m for row in self.a):
            raise ValueError("every row of 'a' must have length m")
        if self.set == "box" and not self.lo <= 0.0 <= self.hi:
            raise ValueError("box bounds 'lo'/'hi' must contain 0")
        return self


class ChargingInstance(_Strict):
    """``min sum c_i x_i`` s.t. ``sum d_i log(1 + x_i) >= b``, ``x_i in [0, 1]``.

    Either explicit ``c`` and ``d`` or ``U(low, high)`` draws clipped below
    at ``floor`` from ``seed``.
    """

    family: Literal["charging"]
    b: float = Field(default=5.0, gt=0.0)
    c: list[Annotated[float, Field(gt=0.0)]] | None = None
    d: list[Annotated[float, Field(gt=0.0)]] | None = None
    low: float = 0.0
    high: float = 1.0
    floor: float = Field(default=0.1, gt=0.0)
    seed: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if (self.c is None) != (self.d is None):
            raise ValueError("give both 'c' and 'd' or neither")
        if self.c is None and self.seed is None:
            raise ValueError("random charging instance needs 'seed'")
        if self.c is not None and len(self.c) != len(self.d):
            raise ValueError("'c' and 'd' must have the same length")
        if self.high <= self.low:
            raise ValueError("'high' must exceed 'low'")
        return self


Instance = Annotated[Union[AbsLinearInstance, ChargingInstance], Field(discriminator="family")]


class BaselineConfig(_Strict):
    tag: Literal["dda", "consensus_subgrad_decaying", "consensus_subgrad_constant"] = "consensus_subgrad_decaying"
    a0: float = Field(default=10.0, gt=0.0)
    alpha: float = Field(default=0.05, gt=0.0)
    step_scale: float = Field(default=1.0, ge=0.0)


class RunConfig(_Strict):
    """Top-level run description.

    ``downsample`` keeps about that many log-spaced rounds in ``trace.csv``
    (0 keeps every round).
    """

    kind: Literal["dsa2", "dual_decomp", "baseline", "reproduce_paper", "compare"]
    rounds: int = Field(ge=1)
    topology: TopologyConfig
    schedule: ScheduleConfig
    instance: Instance
    baseline: BaselineConfig = BaselineConfig()
    downsample: int = Field(default=0, ge=0)
    out: str | None = None

    @model_validator(mode="after")
    def _check(self):
        inst = self.instance
        if self.kind in ("dual_decomp", "reproduce_paper") and inst.family != "charging":
            raise ValueError(f"kind '{self.kind}' needs a charging instance")
        if self.kind == "dsa2" and inst.family != "abs_linear":
            raise ValueError("kind 'dsa2' needs an abs_linear instance")
        if isinstance(inst, AbsLinearInstance) and inst.a is not None and len(inst.a) != self.topology.n:
            raise ValueError("'instance.a' needs one row per agent")
        if isinstance(inst, AbsLinearInstance) and isinstance(inst.x0, list) and len(inst.x0) != self.topology.n:
            raise ValueError("'instance.x0' needs one row per agent")
        if isinstance(inst, ChargingInstance) and inst.c is not None and len(inst.c) != self.topology.n:
            raise ValueError("'instance.c' needs one entry per agent")
        if self.schedule.table is not None and len(self.schedule.table) < self.rounds:
            raise ValueError("'schedule.table' is shorter than 'rounds'")
        return self


def _key_of(err: dict) -> str:
    loc = [str(p) for p in err.get("loc", ()) if not str(p) in ("abs_linear", "charging")]
    return ".".join(loc) if loc else "<root>"


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded TOML table; errors name the offending key."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = _key_of(err)
        msg = err["msg"]
        if err["type"] == "missing":
            msg = f"missing required key '{key}'"
        elif err["type"] == "extra_forbidden":
            msg = f"unknown key '{key}'"
        else:
            msg = f"invalid value for '{key}': {msg}"
        raise ConfigurationError(msg, key=key) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        raise ConfigurationError(f"TOML parse error in {path}: {exc}", line=line, column=col) from None
    return parse_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain TOML-ready table; unset optional fields are left out."""
    return cfg.model_dump(mode="json", exclude_none=True)


def write_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(tomli_w.dumps(config_to_dict(cfg)), encoding="utf-8")
