"""Command-line experiment runner.

    banach-oc simulate --config run.cfg --out results/
    banach-oc optimize --method monotone
    banach-oc compare
    banach-oc selftest

All outputs are CSV files with a header row; floats are written with 17
significant digits.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .cost import total_cost
from .dynamics import ControlTrajectory, DivergenceError, integrate_forward
from .monotone import ConfigurationError, monotone_descend
from .pmp import UnsupportedConfigurationError, pmp_descend
from .systems import AmariSystem


class InputError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def control_names(system):
    names = ["u0"]
    if isinstance(system, AmariSystem):
        for k in range(1, system.params.K + 1):
            names += [f"u{k}c", f"u{k}s"]
    return names


def read_control_file(path, grid, m):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise InputError(f"cannot read control file {path}: {err}") from None
    if not rows:
        raise InputError(f"{path}:1: empty control file")
    if len(rows[0]) != m + 1 or rows[0][0].strip() != "t":
        raise InputError(f"{path}:1: expected header 't' plus {m} control columns")
    data = rows[1:]
    if len(data) != grid.steps:
        raise InputError(f"{path}: expected {grid.steps} control rows, found {len(data)}")
    values = np.empty((grid.steps, m))
    for i, row in enumerate(data):
        if len(row) != m + 1:
            raise InputError(f"{path}:{i + 2}: expected {m + 1} fields, got {len(row)}")
        try:
            values[i] = [float(v) for v in row[1:]]
        except ValueError as err:
            raise InputError(f"{path}:{i + 2}: {err}") from None
    return ControlTrajectory(grid, values)


def _profile_rows(system, xT):
    if isinstance(system, AmariSystem):
        return zip(system.grid.theta, xT, system.target)
    return [(0.0, float(xT[0]), system.params.target)]


def _write_control(path, system, u):
    t = u.grid.nodes[:-1]
    write_csv(path, ["t"] + control_names(system), ([ti, *row] for ti, row in zip(t, u.values)))


def _prepare(cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))
    return out, cfg.build_system(), cfg.time_grid()


def run_simulate(cfg, out=None):
    """Integrate under the configured control file (zero control if none)."""
    out, system, grid = _prepare(cfg, out or cfg.out)
    m = system.control_dim
    if cfg.control_file:
        u = read_control_file(cfg.control_file, grid, m)
    else:
        u = ControlTrajectory.zeros(grid, m)
    x = integrate_forward(system, system.x0, u)
    cost = total_cost(system, x, u)
    write_csv(out / "profile.csv", ["theta", "N_T", "N_des"], _profile_rows(system, x.final))
    norms = np.sqrt(system.inner(x.states, x.states))
    write_csv(out / "energy.csv", ["t", "l2_norm"], zip(grid.nodes, norms))
    return {"cost": cost, "path": x, "control": u}


def _run_method(name, cfg, system, grid):
    u0 = ControlTrajectory.zeros(grid, system.control_dim)
    if name == "pmp":
        return pmp_descend(system, u0, cfg.pmp_config())
    return monotone_descend(system, u0, cfg.monotone_config())


def _write_report(out, system, report):
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "cost_log.csv",
        ["iter", "total", "terminal", "energy", "wall_ms"],
        ((r.iteration, r.total, r.terminal, r.energy, r.wall_ms) for r in report.records),
    )
    _write_control(out / "control.csv", system, report.control)
    write_csv(out / "profile.csv", ["theta", "N_T", "N_des"], _profile_rows(system, report.path.final))
    if report.smoothed_control is not None:
        _write_control(out / "control_smoothed.csv", system, report.smoothed_control)


def _summary_rows(reports):
    rows = []
    for r in reports:
        last = r.records[-1]
        wall = sum(rec.wall_ms for rec in r.records)
        rows.append((r.method, r.iterations, last.total, last.terminal, last.energy, wall, int(r.is_monotone())))
        if r.smoothed_cost is not None:
            c = r.smoothed_cost
            rows.append((r.method + "_smoothed", r.iterations, c.total, c.terminal, c.energy, wall, 1))
    return rows


SUMMARY_HEADER = ["method", "iterations", "total", "terminal", "energy", "wall_ms", "monotone"]


def run_optimize(cfg, out=None, method=None):
    """Run the selected descent method(s) from the zero control.

    Returns the reports; the CLI exit code is 0 iff every run was monotone.
    """
    out, system, grid = _prepare(cfg, out or cfg.out)
    method = method or cfg.method
    names = ["pmp", "monotone"] if method == "both" else [method]
    reports = [_run_method(name, cfg, system, grid) for name in names]
    if len(reports) == 1:
        _write_report(out, system, reports[0])
    else:
        for r in reports:
            _write_report(out / r.method, system, r)
        write_csv(out / "summary.csv", SUMMARY_HEADER, _summary_rows(reports))
    return reports


def run_compare(cfg, out=None):
    """Run both methods and emit merged profile and control tables."""
    out, system, grid = _prepare(cfg, out or cfg.out)
    pmp = _run_method("pmp", cfg, system, grid)
    mono = _run_method("monotone", cfg, system, grid)
    if isinstance(system, AmariSystem):
        theta, target = system.grid.theta, system.target
    else:
        theta, target = np.zeros(1), np.array([system.params.target])
    write_csv(
        out / "compare_profiles.csv",
        ["theta", "N_des", "N_T_pmp", "N_T_monotone"],
        zip(theta, target, pmp.path.final, mono.path.final),
    )
    names = control_names(system)
    header = ["t"] + [f"pmp_{c}" for c in names] + [f"monotone_{c}" for c in names]
    write_csv(
        out / "compare_controls.csv",
        header,
        ([t, *a, *b] for t, a, b in zip(grid.nodes[:-1], pmp.control.values, mono.control.values)),
    )
    write_csv(out / "summary.csv", SUMMARY_HEADER, _summary_rows([pmp, mono]))
    return pmp, mono


def build_parser():
    parser = argparse.ArgumentParser(prog="banach-oc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "optimize", "compare", "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--method", choices=["pmp", "monotone", "both"])
        p.add_argument("--seed", type=int)
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {k: v for k, v in (("out", args.out), ("method", args.method), ("seed", args.seed)) if v is not None}
    return cfg.replace(**changes) if changes else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "selftest":
            from .selftest import run_selftest

            return 0 if run_selftest(cfg.seed) else 1
        if args.command == "simulate":
            res = run_simulate(cfg)
            print(f"terminal={res['cost'].terminal:.10g} energy={res['cost'].energy:.10g}")
            return 0
        if args.command == "optimize":
            reports = run_optimize(cfg)
        else:
            reports = run_compare(cfg)
        for r in reports:
            print(f"{r.method}: iterations={r.iterations} cost={r.costs[-1]:.10g} ({r.stop_reason})")
        return 0 if all(r.is_monotone() for r in reports) else 1
    except (ConfigError, InputError, ConfigurationError, UnsupportedConfigurationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
