"""Command-line entry point ``dsa2``.

Subcommands::

    dsa2 run CONFIG [--out DIR] [--seeds S ...] [--jobs N]
    dsa2 compare CONFIG [--out DIR]
    dsa2 reproduce-paper [--seed S] [--rounds T] [--out DIR]
    dsa2 bounds [PARAMS] [--n N --sigma2 S --gamma G ...] [--out DIR]

Exit status: 0 success, 2 configuration error, 3 numerical or
infeasibility error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bounds import BoundParams, disagreement_bound, theorem1_bound, theorem2_bounds
from .config import RunConfig, load_config, tomllib
from .errors import ConfigurationError, ParameterError
from .experiment import EXIT_CONFIG, EXIT_OK, error_payload, charging_scenario_config, run_experiment, with_seed, write_error


def _run_one(args: tuple[RunConfig, str]) -> int:
    cfg, out = args
    return run_experiment(cfg, out)


def _dispatch(cfg: RunConfig, out: Path, seeds: list[int] | None, jobs: int) -> int:
    """Run ``cfg`` once, or once per seed into ``out/seed_<s>`` (``jobs`` processes)."""
    if not seeds:
        return run_experiment(cfg, out)
    tasks = [(with_seed(cfg, s), str(out / f"seed_{s}")) for s in seeds]
    if jobs <= 1:
        codes = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_run_one, tasks))
    return max(codes)


def _load(path: str, out: Path) -> RunConfig | int:
    try:
        return load_config(path)
    except ConfigurationError as exc:
        code = write_error(out, exc)
        print(json.dumps(error_payload(exc)[1]), file=sys.stderr)
        return code


def _report(code: int, out: Path) -> int:
    err = out / "error.json"
    if code != EXIT_OK and err.is_file():
        print(err.read_text(encoding="utf-8").strip(), file=sys.stderr)
    elif code == EXIT_OK:
        print(f"artifacts written to {out}")
    return code


def cmd_run(args, force_kind: str | None = None) -> int:
    out = Path(args.out) if args.out else None
    cfg = _load(args.config, out or Path("out"))
    if isinstance(cfg, int):
        return cfg
    if force_kind is not None:
        cfg = cfg.model_copy(update={"kind": force_kind})
    out = out or Path(cfg.out or "out")
    return _report(_dispatch(cfg, out, args.seeds, args.jobs), out)


def cmd_reproduce(args) -> int:
    out = Path(args.out or "out/reproduce")
    cfg = charging_scenario_config(seed=args.seed, rounds=args.rounds, downsample=args.downsample)
    code = _report(_dispatch(cfg, out, args.seeds, args.jobs), out)
    meta = out / "meta.json"
    if code == EXIT_OK and meta.is_file():
        checks = json.loads(meta.read_text(encoding="utf-8"))["checks"]
        for name, ok in checks.items():
            print(f"{name}: {ok}")
    return code


BOUND_KEYS = ("n", "sigma2", "gamma", "L", "R2", "D", "lambda_star_norm", "C")


def cmd_bounds(args) -> int:
    params: dict = {}
    if args.params:
        try:
            with open(args.params, "rb") as fh:
                params.update(tomllib.load(fh))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            print(f"cannot read {args.params}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    for key in BOUND_KEYS:
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    unknown = set(params) - set(BOUND_KEYS)
    if unknown:
        print(f"unknown bound parameter(s): {', '.join(sorted(unknown))}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        p = BoundParams(**params)
    except (TypeError, ParameterError) as exc:
        print(f"invalid bound parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t = np.asarray(args.t, dtype=float)
    b = theorem2_bounds(t, p)
    cols = {
        "t": t,
        "theorem1": theorem1_bound(t, p),
        "dual_err": b.dual_err,
        "penalty": b.penalty,
        "primal_hi": b.primal_hi,
        "primal_lo": b.primal_lo,
    }
    print(f"network factor sqrt(n)/(1-sigma2) = {p.network_factor:.6g}")
    print(f"tracking disagreement bound = {disagreement_bound(p):.6g}")
    print(f"penalty bound = {4 * p.n * (p.network_factor + 2.5) * p.D:.6g}/(t+1) + {2 * p.gamma * p.C:.6g}/sqrt(t+1)")
    print("".join(f"{name:>14}" for name in cols))
    for k in range(t.size):
        print("".join(f"{cols[name][k]:>14.6g}" for name in cols))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bounds.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(cols))
            for k in range(t.size):
                w.writerow([repr(float(cols[name][k])) for name in cols])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsa2", description="Distributed subgradient method with double averaging.")
    sub = parser.add_subparsers(dest="command", required=True)

    def seeds_and_jobs(p):
        p.add_argument("--seeds", type=int, nargs="+", help="run once per seed into OUT/seed_<s>")
        p.add_argument("--jobs", type=int, default=1, help="parallel processes for --seeds")

    p = sub.add_parser("run", help="run an experiment from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config 'out' or ./out)")
    seeds_and_jobs(p)

    p = sub.add_parser("compare", help="run the dual method and all baselines on one instance")
    p.add_argument("config")
    p.add_argument("--out")
    seeds_and_jobs(p)

    p = sub.add_parser("reproduce-paper", help="50-agent charging scenario with bound checks")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--downsample", type=int, default=300, help="log-spaced rounds kept in trace.csv (0 = all)")
    p.add_argument("--out")
    seeds_and_jobs(p)

    p = sub.add_parser("bounds", help="print bound tables")
    p.add_argument("params", nargs="?", help="TOML file with bound parameters")
    for key in BOUND_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int if key == "n" else float)
    p.add_argument("--t", type=float, nargs="+", default=[1, 10, 100, 1000, 10000, 100000])
    p.add_argument("--out")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "compare":
        return cmd_run(args, force_kind="compare")
    if args.command == "reproduce-paper":
        return cmd_reproduce(args)
    return cmd_bounds(args)


if __name__ == "__main__":
    sys.exit(main())
