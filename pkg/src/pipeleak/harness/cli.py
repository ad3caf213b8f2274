"""Command line entry point: ``pipeleak {run,gains,sweep,validate}``."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..hydraulics import DomainError, coefficients_for
from ..kernels import build_gain_profile
from ..simcore import Grid, SimulationDiverged
from .config import ConfigError, load_config, set_param
from .io import write_csv, write_gains, write_gnuplot, write_metrics, write_timeseries
from .metrics import run_metrics
from .runner import run_scenario

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _overrides(cfg, args):
    return cfg.with_overrides(seed=args.seed, out=args.out, cells=args.cells)


def execute(cfg, write=True):
    record = run_scenario(cfg)
    metrics = run_metrics(record, cfg.leak, cfg.adaptation, abs(cfg.pipeline.operating_point.q_in))
    metrics["scenario"] = cfg.name
    metrics["mode"] = cfg.mode
    record.metrics = metrics
    if write:
        out = Path(cfg.output.dir)
        write_timeseries(record, out)
        write_metrics(metrics, out)
        write_gnuplot(out)
    return record


def cmd_run(args):
    cfg = _overrides(load_config(args.config), args)
    record = execute(cfg)
    m = record.metrics
    print(f"scenario {cfg.name} ({cfg.mode}) -> {cfg.output.dir}")
    for key in ("chi_hat_final", "delta_hat_final", "chi_final_error", "delta_final_error",
                "delta_settling_time", "detection_time", "decay_rate"):
        if key in m:
            print(f"  {key:20s} {m[key]}")
    return 0


def cmd_gains(args):
    cfg = _overrides(load_config(args.config), args)
    coeffs = coefficients_for(cfg.pipeline)
    grid = Grid(cfg.grid.n_cells, coeffs.epsilon, cfg.grid.t_end)
    gains = build_gain_profile(grid.n_nodes, coeffs, cfg.adaptation.L)
    path = write_gains(gains, cfg.output.dir)
    print(f"wrote {path}")
    return 0


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _sweep_one(cfg):
    record = execute(cfg)
    return record.metrics


def cmd_sweep(args):
    base = _overrides(load_config(args.config), args)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values: empty list")
    root = Path(base.output.dir)
    configs = []
    for value in values:
        cfg = set_param(base, args.param, value)
        cfg = cfg.with_overrides(out=root / f"{args.param}={value}")
        configs.append(cfg)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, configs))
    else:
        results = [_sweep_one(c) for c in configs]
    keys = ["chi_final_error", "delta_final_error", "chi_settling_time", "delta_settling_time", "decay_rate"]
    rows = []
    print(f"{args.param:>24s} " + " ".join(f"{k:>20s}" for k in keys))
    for value, m in zip(values, results):
        vals = [m.get(k) if m.get(k) is not None else float("nan") for k in keys]
        rows.append([value] + vals)
        print(f"{value!s:>24s} " + " ".join(f"{v:20.6g}" for v in vals))
    write_csv(root / "summary.csv", [args.param] + keys, rows)
    return 0


def cmd_validate(args):
    from ..acceptance import run_all

    results = run_all(verbose=True)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pipeleak", description="Observer-based pipeline leak detection")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario JSON file or bundled name (scenario-A, scenario-B)")
        p.add_argument("--seed", type=int, default=None, help="override the noise seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--cells", type=int, default=None, help="override the grid cell count")

    p = sub.add_parser("run", help="simulate a scenario and write outputs")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gains", help="write the observer gain table")
    common(p)
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    common(p)
    p.add_argument("--param", required=True, help="dotted name, e.g. operating_point.q_in")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
