"""Command-line interface: simulate, corrupt, smooth, identify, evaluate, benchmark.

Configuration file
------------------
``--config FILE`` reads plain ``key = value`` lines; ``#`` starts a comment
and blank lines are ignored.  Keys are the long flag names with dashes or
underscores (``noise``, ``seed``, ``smoother``, ``h``, ``h-t``, ``window``,
``steps``, ``method``, ``w``, ``alpha``, ``margin``, ``repeats``,
``workers``).  Flags given on the command line win over the file, and the
file wins over built-in defaults.

Seeds
-----
Benchmark repeat ``r`` of experiment ``e`` uses the noise seed
``SeedSequence([seed, crc32(e), r]).generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .grid import GridError, read_field, write_field
from .identify import (IdentificationReport, NoStableCandidate, ScConfig, StConfig, prepare,
                       sc, st)
from .metrics import coefficient_error, residual_error, support_exact
from .simulate import EXPERIMENTS, NoiseSpec, SimulationError, add_noise, builtin_experiment
from .smoothing import KINDS, SmootherSpec, smooth_space

CSV_HEADER = ("experiment", "method", "noise_pct", "repeats", "mean_ec", "std_ec",
              "mean_er", "std_er", "support_hit_rate", "wall_ms")

DEFAULTS = {"noise": 0.0, "seed": 0, "smoother": "mls", "h": 0.04, "h_t": None, "window": 3,
            "steps": 5, "method": "both", "w": None, "alpha": None, "margin": 0,
            "repeats": None, "workers": 1}

_TYPES = {"noise": float, "seed": int, "smoother": str, "h": float, "h_t": float,
          "window": int, "steps": int, "method": str, "w": int, "alpha": float, "margin": int,
          "repeats": int, "workers": int}

# (experiment, noise levels) per suite; the full "paper" suite covers the headline runs and
# the noise sweeps behind the e_c / e_r curves
SUITES = {
    "paper": (
        ("transport", (0, 0.1, 1, 5, 10, 20, 30, 50, 100)),
        ("burgers", (0, 0.1, 1, 5, 10, 20, 40, 60, 90)),
        ("burgers-diffusion", (0, 0.1, 0.5, 1, 3, 5, 10)),
        ("twod-advdiff", (0, 5, 10)),
    ),
    "quick": (
        ("transport", (0, 1, 5, 10, 20, 30)),
    ),
}
SUITE_REPEATS = {"paper": 50, "quick": 5}


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _TYPES[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (in rising precedence)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["smoother"] not in KINDS:
        raise ConfigError(f"unknown smoother {cfg['smoother']!r}")
    if cfg["method"] not in ("st", "sc", "both"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    return cfg


def smoother_from(cfg: dict) -> SmootherSpec:
    return SmootherSpec(kind=cfg["smoother"], h=cfg["h"], h_t=cfg["h_t"],
                        window=cfg["window"], steps=cfg["steps"])


def derived_seed(seed: int, experiment: str, repeat: int) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(experiment.encode()), int(repeat)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _methods(method: str) -> tuple[str, ...]:
    return ("st", "sc") if method == "both" else (method,)


def run_method(method: str, system, derivs, w=None, alpha=None) -> IdentificationReport:
    if method == "st":
        return st(system, derivs.denoised, StConfig(w=w))
    return sc(system, ScConfig(alpha if alpha is not None else 1 / 200))


def run_methods(data, cfg: dict, methods, w=None, alpha=None):
    """SDD + system once, then each requested method; returns (system, reports)."""
    derivs, system = prepare(data, smoother_from(cfg), margin=cfg["margin"])
    reports = {}
    for m in methods:
        reports[m] = run_method(m, system, derivs, w, alpha)
        reports[m].config["smoother"] = smoother_from(cfg).to_dict()
        reports[m].config["margin"] = cfg["margin"]
    return system, reports


# --- commands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    exp = builtin_experiment(args.experiment)
    write_field(exp.clean(), args.out)
    g = read_field(args.out).grid
    print(f"wrote {args.out}: d={g.d} M={g.M} N={g.N} dx={g.dx:g} dt={g.dt:g}")
    return 0


def cmd_corrupt(args) -> int:
    cfg = resolve(args)
    field = read_field(args.input)
    write_field(add_noise(field, NoiseSpec(cfg["noise"], cfg["seed"])), args.out)
    return 0


def cmd_smooth(args) -> int:
    cfg = resolve(args)
    field = read_field(args.input)
    write_field(smooth_space(field, smoother_from(cfg)), args.out)
    return 0


def cmd_identify(args) -> int:
    cfg = resolve(args)
    data = read_field(args.input)
    _, reports = run_methods(data, cfg, _methods(cfg["method"]), cfg["w"], cfg["alpha"])
    for r in reports.values():
        r.provenance = {"input": str(args.input), "seed": cfg["seed"]}
    if args.report:
        doc = {m: reports[m].to_dict() for m in reports} if len(reports) > 1 else \
            next(iter(reports.values())).to_dict()
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True, default=float)
                                     + "\n", encoding="utf-8")
    for m, r in reports.items():
        if len(reports) > 1:
            print(f"{m.upper()}: {r.pde}")
    if len(reports) == 1:
        print(next(iter(reports.values())).pde)
    return 0


def _load_reports(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "method" in doc:
        return {doc["method"].lower(): IdentificationReport.from_dict(doc)}
    return {m: IdentificationReport.from_dict(d) for m, d in sorted(doc.items())}


def cmd_evaluate(args) -> int:
    cfg = resolve(args)
    exp = builtin_experiment(args.truth)
    reports = _load_reports(args.report)
    clean = exp.clean()
    data = read_field(args.input) if args.input else clean
    if data.grid != clean.grid:
        raise GridError("input field is not on the experiment's grid")
    first = next(iter(reports.values()))
    sm = first.config.get("smoother")
    if sm:
        cfg.update(smoother=sm["kind"], h=sm["h"], h_t=sm["h_t"], window=sm["window"],
                   steps=sm["steps"])
    cfg["margin"] = first.config.get("margin", cfg["margin"])
    _, system = prepare(data, smoother_from(cfg), margin=cfg["margin"])
    out = {}
    for m, r in reports.items():
        out[m] = {"e_c": coefficient_error(r.coefficients, exp.truth),
                  "e_r": residual_error(r.coefficients, exp.truth, system),
                  "support_exact": support_exact(r.coefficients, exp.truth)}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cell(task):
    name, noise, repeats, methods, seed, cfg = task
    warnings.simplefilter("ignore")
    exp = builtin_experiment(name)
    clean = exp.clean()
    # without noise every repeat is identical, so one run stands for all
    n_runs = 1 if noise == 0 else repeats
    res = {m: {"ec": [], "er": [], "hit": 0, "ms": 0.0, "failures": []} for m in methods}
    w = cfg["w"] or exp.w
    alpha = cfg["alpha"] or exp.alpha
    for r in range(n_runs):
        data = add_noise(clean, NoiseSpec(noise, derived_seed(seed, name, r)))
        t0 = time.perf_counter()
        derivs, system = prepare(data, smoother_from(cfg), margin=cfg["margin"])
        prep_ms = 1e3 * (time.perf_counter() - t0)
        for m in methods:
            t0 = time.perf_counter()
            try:
                c = run_method(m, system, derivs, w, alpha).coefficients
            except (NoStableCandidate, ValueError) as exc:
                res[m]["failures"].append(f"repeat {r}: {exc}")
                continue
            res[m]["ms"] += prep_ms + 1e3 * (time.perf_counter() - t0)
            res[m]["ec"].append(coefficient_error(c, exp.truth))
            res[m]["er"].append(residual_error(c, exp.truth, system))
            res[m]["hit"] += support_exact(c, exp.truth)
    rows = []
    for m in methods:
        v = res[m]
        ok = len(v["ec"])
        rows.append({
            "experiment": name, "method": m.upper(), "noise_pct": noise, "repeats": ok,
            "mean_ec": statistics.fmean(v["ec"]) if ok else math.nan,
            "std_ec": statistics.stdev(v["ec"]) if ok > 1 else 0.0 if ok else math.nan,
            "mean_er": statistics.fmean(v["er"]) if ok else math.nan,
            "std_er": statistics.stdev(v["er"]) if ok > 1 else 0.0 if ok else math.nan,
            "support_hit_rate": v["hit"] / ok if ok else math.nan,
            "wall_ms": v["ms"], "failures": v["failures"],
            "e_c": v["ec"], "e_r": v["er"],
        })
    return rows


def cmd_benchmark(args) -> int:
    cfg = resolve(args)
    suite = SUITES[args.suite]
    repeats = cfg["repeats"] or SUITE_REPEATS[args.suite]
    methods = _methods(cfg["method"])
    tasks = [(name, float(p), repeats, methods, cfg["seed"], cfg)
             for name, levels in suite for p in levels]
    if args.experiment:
        tasks = [t for t in tasks if t[0] in args.experiment]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    rows = sorted((r for cell in results for r in cell),
                  key=lambda r: (r["experiment"], r["method"], r["noise_pct"]))
    with open(args.out_csv, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in rows:
            wr.writerow([r[k] if not isinstance(r[k], float) else f"{r[k]:.6g}"
                         for k in CSV_HEADER])
    failed = [r for r in rows if r["failures"]]
    if args.out_json:
        summary = {"suite": args.suite, "seed": cfg["seed"], "repeats": repeats,
                   "methods": list(methods), "smoother": smoother_from(cfg).to_dict(),
                   "cells": rows}
        Path(args.out_json).write_text(json.dumps(summary, indent=2, sort_keys=True)
                                       + "\n", encoding="utf-8")
    for r in failed:
        print(f"cell {r['experiment']}/{r['method']}/{r['noise_pct']}%: "
              f"{len(r['failures'])} failed repeat(s)", file=sys.stderr)
    return 0 if not failed else 1


# --- argument parsing -----------------------------------------------------

def _add_smoother(p):
    p.add_argument("--smoother", choices=KINDS)
    p.add_argument("--h", type=float, help="MLS bandwidth in space (physical units)")
    p.add_argument("--h-t", dest="h_t", type=float, help="MLS bandwidth in time")
    p.add_argument("--window", type=int, help="moving-average window (odd)")
    p.add_argument("--steps", type=int, help="diffusion smoothing steps")


def _add_method(p):
    p.add_argument("--method", choices=("st", "sc", "both"))
    p.add_argument("--w", type=int, help="ST evolution span in coarse steps")
    p.add_argument("--alpha", type=float, help="SC training ratio")
    p.add_argument("--margin", type=int, help="drop rows this close to the boundary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsepde", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="key = value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write clean data for a builtin experiment")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corrupt", help="add seeded Gaussian noise")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, help="noise level in percent")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("smooth", help="spatially smooth every snapshot")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_smoother(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("identify", help="identify the PDE behind a field")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--seed", type=int, help="recorded in the report provenance")
    _add_smoother(p)
    _add_method(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="e_c and e_r of a report against a builtin truth")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", required=True, choices=EXPERIMENTS)
    p.add_argument("--in", dest="input", help="data the report was computed from "
                   "(default: the experiment's clean data)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="seed-averaged experiment grid")
    p.add_argument("--suite", choices=tuple(SUITES), default="quick")
    p.add_argument("--experiment", action="append", choices=EXPERIMENTS,
                   help="restrict to this experiment (repeatable)")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json")
    _add_smoother(p)
    p.add_argument("--method", choices=("st", "sc", "both"))
    p.add_argument("--margin", type=int)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GridError, ConfigError, SimulationError, NoStableCandidate, KeyError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
