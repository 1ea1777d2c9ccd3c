"""Experiment orchestration: build the instance, run, measure, write artifacts.

Artifacts in the output directory:

* ``trace.csv``: one row per (algorithm, round, agent), floats in shortest
  round-trip form, network-level columns repeated on every agent row;
* ``meta.json``: config echo, the graph's sigma2, measured constants,
  ground truth, checks and wall time;
* SVG plots of the error trajectories with their bound curves;
* ``error.json`` instead, when the run fails.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .baselines import BaselineKind, run_consensus_dual_subgrad, run_dda, run_dda_dual
from .bounds import BoundParams, Metrics, measure_metrics, theorem1_bound, theorem2_bounds
from .config import AbsLinearInstance, ChargingInstance, RunConfig, TopologyConfig, config_to_dict
from .convex import L1_LINF, L2, LocalObjective, ProxSetup, box, l2_ball, make_abs_linear_objective, nonneg_orthant, simplex
from .dual import ChargingProblem, random_charging, run_dual_decomp
from .engine import GammaSchedule, run_dsa2
from .errors import ConfigurationError, DSA2Error, InfeasibleError, NumericalError, ParameterError, PreconditionError
from .oracles import GroundTruth, brute_force_min, centralized_sa2, solve_example_dual_bisection
from .rng import PRNG_ALGORITHM, STREAM_INSTANCE, STREAM_SAMPLING, make_rng
from .topology import Topology, WeightMatrix, gen_named, gen_small_world, metropolis_weights
from .trace import TRACE_SCHEMA, DualTrace, PrimalTrace

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
MAX_ITERATE_COLUMNS = 16
BRUTE_FORCE_RESOLUTION = 1e-5
PLOT_FILES_DUAL = ("primal_error.svg", "penalty.svg")
PLOT_FILES_PRIMAL = ("objective_error.svg", "consensus_diameter.svg")


# ---------------------------------------------------------------- building


def build_topology(tc: TopologyConfig) -> Topology:
    if tc.kind == "single":
        return Topology(1, ())
    if tc.kind == "small_world":
        return gen_small_world(tc.n, tc.k, tc.p_rewire, tc.seed)
    if tc.kind == "edgelist":
        return Topology(tc.n, tuple(tuple(e) for e in tc.edges))
    return gen_named(tc.kind, tc.n)


def build_setup(inst: AbsLinearInstance) -> ProxSetup:
    m = inst.m
    if inst.set == "box":
        fs = box(np.full(m, inst.lo), np.full(m, inst.hi))
    elif inst.set == "l2_ball":
        fs = l2_ball(m, inst.radius)
    elif inst.set == "simplex":
        fs = simplex(m)
    else:
        fs = nonneg_orthant(m)
    return ProxSetup(fs, inst.prox)


def abs_linear_rows(inst: AbsLinearInstance, n: int) -> np.ndarray:
    if inst.a is not None:
        return np.asarray(inst.a, dtype=float)
    return inst.scale * make_rng(inst.seed, STREAM_INSTANCE).standard_normal((n, inst.m))


def initial_points(inst: AbsLinearInstance, setup: ProxSetup, n: int) -> np.ndarray | None:
    if inst.x0 == "anchor":
        return None
    if inst.x0 == "random":
        return setup.set.sample(make_rng(inst.seed, STREAM_SAMPLING), n)
    return np.asarray(inst.x0, dtype=float)


def build_charging(inst: ChargingInstance, n: int) -> ChargingProblem:
    if inst.c is not None:
        return ChargingProblem(inst.c, inst.d, inst.b)
    return random_charging(n, inst.seed, b=inst.b, low=inst.low, high=inst.high, floor=inst.floor)


# ---------------------------------------------------------------- ground truth


def abs_linear_truth(a: np.ndarray, setup: ProxSetup) -> tuple[GroundTruth, str]:
    """Minimum of ``(1/n) sum_i |<a_i, x>|`` over the feasible set.

    Box and ball in dimension <= 2 use the exhaustive grid; the simplex is
    an LP in ``(x, u)`` with ``-u_i <= <a_i, x> <= u_i``.  Otherwise the set
    contains the origin, where the nonnegative objective vanishes.
    """
    n, m = a.shape
    kind = setup.set.kind
    if kind in ("box", "l2_ball") and m <= 2:
        truth = brute_force_min(lambda pts: np.abs(pts @ a.T).mean(axis=-1), setup.set, BRUTE_FORCE_RESOLUTION)
        return truth, f"grid@{BRUTE_FORCE_RESOLUTION:g}"
    if kind == "simplex":
        cost = np.concatenate([np.zeros(m), np.full(n, 1.0 / n)])
        a_ub = np.block([[a, -np.eye(n)], [-a, -np.eye(n)]])
        a_eq = np.concatenate([np.ones(m), np.zeros(n)])[None, :]
        res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(2 * n), A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * (m + n), method="highs")
        if res.status != 0:
            raise NumericalError(f"LP ground truth failed: {res.message}")
        x = res.x[:m]
        return GroundTruth(x, float(np.abs(a @ x).mean())), "linprog"
    return GroundTruth(np.zeros(m), 0.0), "origin"


# ---------------------------------------------------------------- results


@dataclass
class ExperimentResult:
    """Everything a run produced, before serialization."""

    config: RunConfig
    sigma2: float
    traces: list
    metrics: list[Metrics]
    bounds: list[dict]
    truth: GroundTruth
    truth_method: str
    constants: dict
    checks: dict = field(default_factory=dict)


def _primal_bounds(trace: PrimalTrace, setup: ProxSetup, truth: GroundTruth, gamma0: float):
    p = BoundParams(n=trace.n, sigma2=trace.sigma2, gamma=gamma0, L=trace.lipschitz,
                    R2=float(setup.d_value(truth.x_star)))
    return p, {"bound_obj": theorem1_bound(trace.t, p)}


def _dual_bounds(trace: DualTrace, problem: ChargingProblem, truth: GroundTruth, gamma0: float):
    p = BoundParams(n=trace.n, sigma2=trace.sigma2, gamma=gamma0, D=trace.measured_D,
                    lambda_star_norm=float(np.linalg.norm(truth.lambda_star)),
                    C=max(truth.f_star - problem.unconstrained_min(), 0.0))
    b = theorem2_bounds(trace.t, p)
    return p, {"bound_dual_err": b.dual_err, "bound_penalty": b.penalty,
               "bound_primal_hi": b.primal_hi, "bound_primal_lo": b.primal_lo}


def _primal_experiment(cfg: RunConfig, p: WeightMatrix) -> ExperimentResult:
    inst = cfg.instance
    if cfg.kind == "baseline" and cfg.baseline.tag != "dda":
        raise ConfigurationError("consensus baselines need a charging instance", key="baseline.tag")
    setup = build_setup(inst)
    norm = L2 if inst.prox == "quadratic" else L1_LINF
    a = abs_linear_rows(inst, p.n)
    problem = [make_abs_linear_objective(row, norm) for row in a]
    sched = GammaSchedule(cfg.schedule.gamma0, tuple(cfg.schedule.table) if cfg.schedule.table else None)
    truth, method = abs_linear_truth(a, setup)
    x0 = initial_points(inst, setup, p.n)
    traces = []
    if cfg.kind in ("dsa2", "compare"):
        traces.append(run_dsa2(problem, setup, p, sched, x0=x0, rounds=cfg.rounds))
    if cfg.kind in ("baseline", "compare"):
        traces.append(run_dda(problem, setup, p, sched, x0=x0, rounds=cfg.rounds))
    metrics, bounds, checks = [], [], {}
    constants = {"L": max(o.lipschitz_bound for o in problem)}
    for tr in traces:
        m = measure_metrics(tr, truth)
        metrics.append(m)
        if tr.algorithm == "dsa2":
            bp, bd = _primal_bounds(tr, setup, truth, cfg.schedule.gamma0)
            constants["R2"] = bp.R2
            checks["theorem1_holds"] = bool(np.all(m.obj_err <= bd["bound_obj"][:, None] + 1e-6))
            bounds.append(bd)
        else:
            bounds.append({})
    if p.n == 1 and cfg.kind == "dsa2":
        ref = centralized_sa2(problem, setup, sched, x0=None if x0 is None else x0[0], rounds=cfg.rounds)
        dev = float(np.max(np.abs(traces[0].x[:, 0, :] - ref.x)))
        checks["centralized_max_abs_dev"] = dev
    return ExperimentResult(cfg, p.sigma2, traces, metrics, bounds, truth, method, constants, checks)


def _dual_experiment(cfg: RunConfig, p: WeightMatrix) -> ExperimentResult:
    problem = build_charging(cfg.instance, p.n)
    if problem.n != p.n:
        raise ConfigurationError("instance size does not match topology.n", key="topology.n")
    truth = solve_example_dual_bisection(problem.c, problem.d, problem.b)
    sched = GammaSchedule(cfg.schedule.gamma0, tuple(cfg.schedule.table) if cfg.schedule.table else None)
    traces = []
    if cfg.kind in ("dual_decomp", "reproduce_paper", "compare"):
        traces.append(run_dual_decomp(problem, p, sched, rounds=cfg.rounds))
    if cfg.kind == "baseline":
        kind = BaselineKind(cfg.baseline.tag, cfg.baseline.a0, cfg.baseline.alpha)
        if kind.tag == "dda":
            traces.append(run_dda_dual(problem, p, sched, rounds=cfg.rounds))
        else:
            traces.append(run_consensus_dual_subgrad(problem, p, kind, rounds=cfg.rounds,
                                                     step_scale=cfg.baseline.step_scale))
    if cfg.kind == "compare":
        traces.append(run_dda_dual(problem, p, sched, rounds=cfg.rounds))
        for tag in ("consensus_subgrad_decaying", "consensus_subgrad_constant"):
            kind = BaselineKind(tag, cfg.baseline.a0, cfg.baseline.alpha)
            traces.append(run_consensus_dual_subgrad(problem, p, kind, rounds=cfg.rounds,
                                                     step_scale=cfg.baseline.step_scale))
    metrics, bounds, checks = [], [], {}
    constants: dict = {"lambda_star_norm": float(np.linalg.norm(truth.lambda_star))}
    for tr in traces:
        m = measure_metrics(tr, truth)
        metrics.append(m)
        if tr.algorithm != "dsa2_dual":
            bounds.append({})
            continue
        bp, bd = _dual_bounds(tr, problem, truth, cfg.schedule.gamma0)
        constants.update(D=bp.D, C=bp.C)
        bounds.append(bd)
        checks["penalty_below_bound_all_t"] = bool(np.all(m.penalty < bd["bound_penalty"]))
        checks["dual_err_within_bound"] = bool(np.all(m.dual_err <= bd["bound_dual_err"][:, None] + 1e-6))
        checks["primal_sandwich_holds"] = bool(np.all(m.primal_err <= bd["bound_primal_hi"] + 1e-6)
                                               and np.all(m.primal_err >= bd["bound_primal_lo"] - 1e-6))
        if tr.rounds >= 100:
            checks["penalty_decreasing_100_to_T"] = bool(m.penalty[-1] < m.penalty[99])
    return ExperimentResult(cfg, p.sigma2, traces, metrics, bounds, truth, "bisection", constants, checks)


def execute(cfg: RunConfig) -> ExperimentResult:
    """Run the configured pipeline in memory."""
    topo = build_topology(cfg.topology)
    if topo.n != cfg.topology.n:
        raise ConfigurationError("edge list does not match topology.n", key="topology.n")
    p = metropolis_weights(topo)
    if isinstance(cfg.instance, AbsLinearInstance):
        return _primal_experiment(cfg, p)
    return _dual_experiment(cfg, p)


# ---------------------------------------------------------------- CSV


def log_spaced_rounds(T: int, count: int) -> np.ndarray:
    """About ``count`` log-spaced rounds in ``1..T``, always including both ends."""
    if count <= 0 or count >= T:
        return np.arange(1, T + 1)
    ts = np.unique(np.round(np.logspace(0.0, math.log10(T), count)).astype(int))
    return np.union1d(ts, [1, T])


def fmt(v) -> str:
    """Shortest decimal that parses back to the same double."""
    if v is None:
        return ""
    return repr(float(v))


def _vec_columns(prefix: str, m: int) -> list[str]:
    return [f"{prefix}_{k}" for k in range(m)] if m <= MAX_ITERATE_COLUMNS else [f"{prefix}_norm"]


def _vec_values(v: np.ndarray) -> list[float]:
    return list(v) if v.shape[-1] <= MAX_ITERATE_COLUMNS else [float(np.linalg.norm(v))]


def _trace_rows(trace, metrics: Metrics, bounds: dict, keep: np.ndarray):
    """Yield (column -> value) dicts for the kept rounds of one trace."""
    primal = isinstance(trace, PrimalTrace)
    idx = keep[keep <= trace.rounds] - 1
    for k in idx:
        t = int(trace.t[k])
        net = {name: col[k] for name, col in bounds.items()}
        net["diameter"] = metrics.diameter[k]
        if not primal:
            net.update(penalty=metrics.penalty[k], primal_err=metrics.primal_err[k],
                       primal_err_abs=abs(metrics.primal_err[k]))
        for i in range(trace.n):
            row = {"schema": TRACE_SCHEMA, "algorithm": trace.algorithm, "t": str(t), "agent": str(i)}
            if primal:
                row.update(zip(_vec_columns("x", trace.x.shape[2]), map(fmt, _vec_values(trace.x[k, i]))))
                row.update(obj_err=fmt(metrics.obj_err[k, i]), s_dev=fmt(metrics.s_dev[k, i]))
            else:
                row.update(zip(_vec_columns("lam", trace.lam.shape[2]), map(fmt, _vec_values(trace.lam[k, i]))))
                row.update(zip(_vec_columns("x_avg", trace.x_avg.shape[2]), map(fmt, _vec_values(trace.x_avg[k, i]))))
                row["dual_err"] = fmt(metrics.dual_err[k, i])
            row.update((name, fmt(v)) for name, v in net.items())
            yield row


def write_trace_csv(result: ExperimentResult, path: str | Path) -> int:
    """Write the combined trace; returns the number of data rows."""
    keep = log_spaced_rounds(max(tr.rounds for tr in result.traces), result.config.downsample)
    rows = []
    for tr, m, b in zip(result.traces, result.metrics, result.bounds):
        rows.extend(_trace_rows(tr, m, b, keep))
    columns: dict[str, None] = {}
    for row in rows:
        columns.update(dict.fromkeys(row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), restval="", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)


# ---------------------------------------------------------------- orchestration


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def build_meta(result: ExperimentResult, wall_time: float, files: list[str]) -> dict:
    t = result.truth
    return _jsonable({
        "status": "ok",
        "schema": TRACE_SCHEMA,
        "prng": PRNG_ALGORITHM,
        "config": config_to_dict(result.config),
        "sigma2": result.sigma2,
        "constants": result.constants,
        "ground_truth": {
            "method": result.truth_method,
            "f_star": t.f_star,
            "x_star": t.x_star,
            "lambda_star": t.lambda_star,
            "kkt_residual": t.kkt_residual,
        },
        "algorithms": [tr.algorithm for tr in result.traces],
        "rounds": result.config.rounds,
        "checks": result.checks,
        "files": files,
        "wall_time_s": wall_time,
    })


def error_payload(exc: BaseException) -> tuple[int, dict]:
    if isinstance(exc, (ConfigurationError, ParameterError, PreconditionError)):
        code = EXIT_CONFIG
    elif isinstance(exc, (NumericalError, InfeasibleError, ArithmeticError, FloatingPointError)):
        code = EXIT_NUMERICAL
    else:
        code = 1
    payload = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    for attr in ("key", "line", "column"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    return code, payload


def write_error(out_dir: Path, exc: BaseException) -> int:
    code, payload = error_payload(exc)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "error.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return code


def run_experiment(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    """Execute ``cfg`` and write all artifacts; returns the process exit status."""
    from .plots import emit_plots

    out = Path(out_dir if out_dir is not None else (cfg.out or "out"))
    t0 = time.perf_counter()
    try:
        result = execute(cfg)
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(result, out / "trace.csv")
        plots = emit_plots(out / "trace.csv", out)
        meta = build_meta(result, time.perf_counter() - t0, ["trace.csv"] + [p.name for p in plots])
        (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except (DSA2Error, ValueError, ArithmeticError) as exc:
        return write_error(out, exc)
    return EXIT_OK


def charging_scenario_config(seed: int = 42, rounds: int = 100_000, downsample: int = 300, out: str | None = None) -> RunConfig:
    """The 50-agent charging scenario: small-world graph (k=4, p=0.2), b=5, gamma0=0.2."""
    from .config import parse_config

    data = {
        "kind": "reproduce_paper",
        "rounds": rounds,
        "downsample": downsample,
        "topology": {"kind": "small_world", "n": 50, "k": 4, "p_rewire": 0.2, "seed": seed},
        "schedule": {"gamma0": 0.2},
        "instance": {"family": "charging", "b": 5.0, "seed": seed},
    }
    if out is not None:
        data["out"] = out
    return parse_config(data)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Copy of ``cfg`` with every randomized component reseeded."""
    updates = {}
    if cfg.topology.seed is not None:
        updates["topology"] = cfg.topology.model_copy(update={"seed": seed})
    if getattr(cfg.instance, "seed", None) is not None:
        updates["instance"] = cfg.instance.model_copy(update={"seed": seed})
    return cfg.model_copy(update=updates)
