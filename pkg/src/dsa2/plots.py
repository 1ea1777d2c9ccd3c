"""Log-log error plots rebuilt from a ``trace.csv``.

Dual runs give ``primal_error.svg`` (absolute primal objective error) and
``penalty.svg`` (quadratic constraint penalty).  Primal runs give
``objective_error.svg`` (worst agent) and ``consensus_diameter.svg``.
Bound columns, where present, are overlaid as dashed curves.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .svgplot import PALETTE, Series, loglog_svg


def _num(cell: str) -> float:
    return float(cell) if cell != "" else float("nan")


def read_trace(path: str | Path) -> dict[str, dict[str, np.ndarray]]:
    """Per-algorithm network series: ``t`` plus every numeric column.

    Per-agent columns are reduced by their max absolute value over agents.
    """
    path = Path(path)
    if not path.is_file() or path.stat().st_size == 0:
        raise ParameterError(f"empty or missing trace: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"trace has no rows: {path}")
    grouped: dict[str, dict[int, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        grouped[row["algorithm"]][int(row["t"])].append(row)
    skip = {"schema", "algorithm", "t", "agent"}
    out = {}
    for alg, by_t in grouped.items():
        ts = sorted(by_t)
        cols = [c for c in rows[0] if c not in skip]
        series = {"t": np.array(ts, dtype=float)}
        for c in cols:
            vals = [np.nanmax(np.abs([_num(r[c]) for r in by_t[t]])) if c in ("obj_err", "dual_err")
                    else _num(by_t[t][0][c]) for t in ts]
            series[c] = np.array(vals)
        out[alg] = series
    return out


def _figure(data, value_col, bound_fn, title, ylabel) -> str:
    series = []
    for idx, (alg, s) in enumerate(data.items()):
        color = PALETTE[idx % len(PALETTE)]
        series.append(Series(alg, s["t"], np.abs(s[value_col]), color=color))
        bound = bound_fn(s)
        if bound is not None and np.any(np.isfinite(bound)):
            series.append(Series(f"{alg} bound", s["t"], bound, dashed=True, color=color))
    return loglog_svg(series, title, "iteration t", ylabel)


def emit_plots(trace_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Write the SVG plots for ``trace_csv`` into ``out_dir``; returns their paths."""
    data = read_trace(trace_csv)
    out_dir = Path(out_dir)
    first = next(iter(data.values()))
    if "penalty" in first:
        def primal_bound(s):
            if "bound_primal_hi" not in s:
                return None
            return np.maximum(s["bound_primal_hi"], -s["bound_primal_lo"])

        figs = {
            "primal_error.svg": _figure(data, "primal_err", primal_bound,
                                        "Primal objective error", "|sum f_j(x_j,t) - f*|"),
            "penalty.svg": _figure(data, "penalty", lambda s: s.get("bound_penalty"),
                                   "Quadratic penalty", "||(sum h_j(x_j,t))_+||^2"),
        }
    else:
        figs = {
            "objective_error.svg": _figure(data, "obj_err", lambda s: s.get("bound_obj"),
                                           "Objective error (worst agent)", "f(x_i,t) - f*"),
            "consensus_diameter.svg": _figure(data, "diameter", lambda s: None,
                                              "Consensus diameter", "max ||x_i,t - x_j,t||"),
        }
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in figs.items():
        p = out_dir / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
