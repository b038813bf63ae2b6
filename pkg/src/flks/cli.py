"""Command-line front end: single runs, sweeps, convergence studies, the
stiff-limit analytic wave, and numeric-vs-analytic comparisons.

Everything crossing this boundary (config values and CSV columns) is in
growth-scaled ("hatted") units.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytic import (
    StiffWaveParams,
    coefficients,
    constraint_f,
    constraint_g,
    find_xi_c,
    make_profile,
    profile_density,
    validate_solution,
)
from .exceptions import ConfigError, FLKSError, NoRootError, PositivityError
from .model import ModelParams, from_scaled, to_scaled
from .solver import GridSpec, SnapshotSchedule, init_state, run, write_snapshot
from .waves import SolutionType, classify, matching_distance, min_speed

log = logging.getLogger("flks")

# A speed-2 front needs about 2 t_end + 35 of room beyond L0, hence the short
# coarse horizon on the half-length domain.
PRESETS = {
    "paper": {"L_hat": 1000.0, "cells": 10000, "L0_hat": 100.0, "t_end_hat": 400.0, "fit_window": (300.0, 400.0)},
    "coarse": {"L_hat": 500.0, "cells": 2500, "L0_hat": 25.0, "t_end_hat": 200.0, "fit_window": (100.0, 200.0)},
}

PHASE_COLUMNS = [
    "chi_hat", "stiffness", "solution_type", "c_star_hat", "lambda_star_hat",
    "c_dispersion_hat", "c_min_hat", "rho_max", "status",
]


@dataclass(frozen=True)
class RunConfig:
    chi_hat: float = 1.5
    stiffness: float = 0.01  # 2 chi / (pi delta); inf selects the stiff sign flux
    d: float = 4.0
    p: float = 0.5
    L_hat: float = 1000.0
    cells: int = 10000
    L0_hat: float = 100.0
    t_end_hat: float = 400.0
    snapshot_every: float = 50.0
    fit_window: tuple = (300.0, 400.0)
    out_dir: str = "out"
    preset: str = "paper"
    max_parallel: int = os.cpu_count() or 1
    chi_hat_values: tuple = (1.0, 1.5, 3.0)
    stiffness_values: tuple = (0.01, 5.0, 9.0, 10.0, 20.0)
    cells_values: tuple = (5000, 10000, 20000)
    compare_stiffness: tuple = (7.0, 8.0, 9.0, 10.0)
    scan: bool = False
    scan_chi_hat_values: tuple = tuple(round(2.05 + 0.05 * k, 2) for k in range(60))
    gamma_convention: str = "printed"


# ---------------------------------------------------------------- config parsing


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(key, f"not a number: {text!r}") from None
    if math.isnan(v):
        raise ConfigError(key, "NaN is not allowed")
    return v


def _positive(key, text):
    v = _float(key, text)
    if not v > 0:
        raise ConfigError(key, f"must be positive, got {text!r}")
    return v


def _finite_positive(key, text):
    v = _positive(key, text)
    if math.isinf(v):
        raise ConfigError(key, "must be finite")
    return v


def _nonnegative(key, text):
    v = _float(key, text)
    if v < 0 or math.isinf(v):
        raise ConfigError(key, f"must be finite and >= 0, got {text!r}")
    return v


def _count(key, text):
    try:
        v = int(str(text).strip())
    except ValueError:
        raise ConfigError(key, f"not an integer: {text!r}") from None
    if v < 1:
        raise ConfigError(key, f"must be a positive integer, got {text!r}")
    return v


def _list(item):
    def parse(key, text):
        parts = [s for s in (x.strip() for x in str(text).split(",")) if s]
        if not parts:
            raise ConfigError(key, "empty list")
        return tuple(item(key, s) for s in parts)

    return parse


def _window(key, text):
    w = _list(_nonnegative)(key, text)
    if len(w) != 2 or not w[0] < w[1]:
        raise ConfigError(key, f"expected 'begin, end' with begin < end, got {text!r}")
    return w


def _choice(*options):
    def parse(key, text):
        v = str(text).strip()
        if v not in options:
            raise ConfigError(key, f"expected one of {', '.join(options)}, got {text!r}")
        return v

    return parse


def _bool(key, text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected true/false, got {text!r}")


PARSERS = {
    "chi_hat": _finite_positive,
    "stiffness": _positive,
    "d": _finite_positive,
    "p": _finite_positive,
    "L_hat": _finite_positive,
    "cells": _count,
    "L0_hat": _finite_positive,
    "t_end_hat": _nonnegative,
    "snapshot_every": _finite_positive,
    "fit_window": _window,
    "out_dir": lambda key, text: str(text).strip(),
    "preset": _choice(*PRESETS),
    "max_parallel": _count,
    "chi_hat_values": _list(_finite_positive),
    "stiffness_values": _list(_positive),
    "cells_values": _list(_count),
    "compare_stiffness": _list(_positive),
    "scan": _bool,
    "scan_chi_hat_values": _list(_finite_positive),
    "gamma_convention": _choice("printed", "smooth"),
}
assert set(PARSERS) == {f.name for f in dataclasses.fields(RunConfig)}


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment. Returns raw strings."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(key, f"line {n}: unknown key")
        values[key] = value
    return values


def resolve_config(file_values=None, overrides=None, preset=None):
    """defaults < preset < config file < command-line overrides."""
    file_values = dict(file_values or {})
    overrides = dict(overrides or {})
    for key in list(file_values) + list(overrides):
        if key not in PARSERS:
            raise ConfigError(key, "unknown key")
    raw = {}
    preset = overrides.get("preset", preset) or file_values.get("preset") or "paper"
    preset = PARSERS["preset"]("preset", preset)
    raw.update(PRESETS[preset])
    raw["preset"] = preset
    for source in (file_values, overrides):
        for key, value in source.items():
            raw[key] = value if not isinstance(value, str) else PARSERS[key](key, value)
    cfg = RunConfig(**raw)
    if cfg.L0_hat >= cfg.L_hat:
        raise ConfigError("L0_hat", f"must be smaller than L_hat={cfg.L_hat:g}")
    return cfg


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))  # shortest text that round-trips
    if isinstance(v, (tuple, list)):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def write_resolved(cfg: RunConfig, out_dir):
    lines = [f"{f.name} = {format_value(getattr(cfg, f.name))}" for f in dataclasses.fields(cfg)]
    (Path(out_dir) / "resolved.cfg").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- output helpers


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([_cell(v) for v in values])


# ---------------------------------------------------------------- simulations


def model_for(cfg: RunConfig):
    params = ModelParams.from_scaled(cfg.chi_hat, cfg.stiffness, cfg.d, cfg.p)
    grid = GridSpec.from_scaled(cfg.p, cfg.L_hat, cfg.cells)
    return params, grid


@dataclass
class RunResult:
    row: dict
    trajectory: object = None
    xi_c_hat: float = math.nan


def simulate(cfg: RunConfig, keep_trajectory=False, want_xi_c=False) -> RunResult:
    """One run: integrate, classify, summarise as a phase-table row."""
    params, grid = model_for(cfg)
    p = cfg.p
    row = dict.fromkeys(PHASE_COLUMNS, math.nan)
    row.update(chi_hat=cfg.chi_hat, stiffness=cfg.stiffness, c_min_hat=min_speed(params) / math.sqrt(p))
    row["solution_type"] = SolutionType.UNCLASSIFIED.value

    times = np.arange(cfg.snapshot_every, cfg.t_end_hat + 1e-9, cfg.snapshot_every)
    if times.size and not math.isclose(times[-1], cfg.t_end_hat):
        times = np.append(times, cfg.t_end_hat)
    schedule = SnapshotSchedule(tuple(from_scaled(p, 0.0, t)[1] for t in times))
    state = init_state(grid, from_scaled(p, cfg.L0_hat)[0], cfg.d)
    try:
        traj = run(state, params, grid, from_scaled(p, 0.0, cfg.t_end_hat)[1], schedule)
    except PositivityError as err:
        traj = err.trajectory
        log.error("chi_hat=%g stiffness=%g: %s", cfg.chi_hat, cfg.stiffness, err)

    result = RunResult(row, traj if keep_trajectory else None)
    if traj.status != "ok":
        row["status"] = "aborted"
        return result
    fit = tuple(from_scaled(p, 0.0, t)[1] for t in cfg.fit_window)
    if len(traj.snapshots) < 2:
        row["status"] = "non-steady"
        return result
    kind, metrics = classify(traj, params, grid, fit_window=fit)
    row["solution_type"] = kind.value
    if metrics is None:
        row["status"] = "non-steady"
        return result
    row.update(metrics.scaled(p))
    if kind is SolutionType.UNCLASSIFIED:
        row["status"] = "unclassified"
    elif not metrics.steady and kind is not SolutionType.V_LocalizedSpikes:
        row["status"] = "non-steady"
    else:
        row["status"] = "ok"
    if want_xi_c:
        try:
            result.xi_c_hat = to_scaled(p, matching_distance(traj.snapshots[-1][1], grid, params.rho_c))[0]
        except FLKSError as err:
            log.warning("xi_c measurement failed: %s", err)
    return result


def _simulate_row(cfg):
    try:
        return simulate(cfg).row
    except Exception as err:  # one bad grid point must not stop a sweep
        log.error("chi_hat=%g stiffness=%g failed: %s", cfg.chi_hat, cfg.stiffness, err)
        row = dict.fromkeys(PHASE_COLUMNS, math.nan)
        row.update(chi_hat=cfg.chi_hat, stiffness=cfg.stiffness, solution_type="unclassified", status="aborted")
        return row


def _simulate_compare(cfg):
    r = simulate(cfg, want_xi_c=True)
    return r.row, r.xi_c_hat


def _map(func, items, max_parallel):
    """Order-preserving map, through a process pool when it can help."""
    items = list(items)
    workers = min(max_parallel, len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------- commands


def cmd_run(cfg: RunConfig):
    out = Path(cfg.out_dir)
    result = simulate(cfg, keep_trajectory=True)
    traj = result.trajectory
    _, grid = model_for(cfg)
    for t, st in traj.snapshots:
        t_hat = to_scaled(cfg.p, 0.0, t)[1]
        write_snapshot(out / f"snapshot_t{t_hat:g}.dat", st, grid, cfg.p)
    tr = traj.front_trace
    trace_rows = [(to_scaled(cfg.p, x, t)[1], to_scaled(cfg.p, x)[0]) for t, x in zip(tr.times, tr.positions)]
    write_csv(out / "front_trace.csv", ["t_hat", "x_star_hat"], trace_rows)
    write_csv(out / "metrics.csv", PHASE_COLUMNS, [result.row])
    r = result.row
    print(f"type {r['solution_type']}  c_star_hat {r['c_star_hat']:.6g}  status {r['status']}")
    return 1 if r["status"] == "aborted" else 0


def cmd_sweep(cfg: RunConfig):
    grid = [dataclasses.replace(cfg, chi_hat=c, stiffness=s) for c in cfg.chi_hat_values for s in cfg.stiffness_values]
    rows = _map(_simulate_row, grid, cfg.max_parallel)
    write_csv(Path(cfg.out_dir) / "phase.csv", PHASE_COLUMNS, rows)
    for r in rows:
        print(f"chi_hat {r['chi_hat']:g}  stiffness {r['stiffness']:g}  type {r['solution_type']}  status {r['status']}")
    return 0


def cmd_converge(cfg: RunConfig):
    if len(cfg.cells_values) < 2:
        raise ConfigError("cells_values", "need at least two mesh sizes")
    order = sorted(cfg.cells_values)
    rows = _map(_simulate_row, [dataclasses.replace(cfg, cells=n) for n in order], cfg.max_parallel)
    table = []
    prev = None
    for n, r in zip(order, rows):
        c, lam, cl = r["c_star_hat"], r["lambda_star_hat"], r["c_dispersion_hat"]
        rec = {
            "I": n, "c_star": c, "lambda_star": lam, "c_of_lambda_star": cl,
            "rel_dispersion": (c - cl) / cl, "I_coarser": "", "rel_change_c": math.nan, "rel_change_lambda": math.nan,
            "status": r["status"],
        }
        if prev is not None:
            rec["I_coarser"] = prev["I"]
            rec["rel_change_c"] = abs((c - prev["c_star"]) / c)
            rec["rel_change_lambda"] = abs((lam - prev["lambda_star"]) / lam)
        table.append(rec)
        prev = rec
    cols = ["I", "c_star", "lambda_star", "c_of_lambda_star", "rel_dispersion", "I_coarser", "rel_change_c", "rel_change_lambda", "status"]
    write_csv(Path(cfg.out_dir) / "converge.csv", cols, table)
    for rec in table[1:]:
        print(f"{rec['I']} -- {rec['I_coarser']}: dc {rec['rel_change_c']:.2e}  dlambda {rec['rel_change_lambda']:.2e}")
    return 0


def cmd_analytic(cfg: RunConfig):
    out = Path(cfg.out_dir)
    conv = cfg.gamma_convention
    prm = StiffWaveParams(cfg.chi_hat, cfg.p, cfg.d)
    root_cols = [
        "chi_hat", "p", "d", "root_found", "xi_c_hat", "alpha", "gamma", "f_positive", "g_positive",
        "admissible", "sign_changes", "gamma_convention", "validation_ok", "failed_checks",
    ]
    row = dict.fromkeys(root_cols, "")
    row.update(chi_hat=cfg.chi_hat, p=cfg.p, d=cfg.d, gamma_convention=conv)
    try:
        root = find_xi_c(prm, gamma_convention=conv)
    except NoRootError as err:
        log.warning("%s", err)
        row.update(root_found="false", xi_c_hat=math.nan)
        write_csv(out / "analytic_root.csv", root_cols, [row])
        print("no root of F in the bracket")
    else:
        profile = make_profile(prm, root.xi_c_hat, conv)
        report = validate_solution(profile)
        row.update(
            root_found="true", xi_c_hat=root.xi_c_hat, alpha=root.alpha, gamma=root.gamma,
            f_positive=format_value(root.f_positive), g_positive=format_value(root.g_positive),
            admissible=format_value(root.admissible), sign_changes=root.sign_changes,
            validation_ok=format_value(report.ok), failed_checks=";".join(report.failures),
        )
        write_csv(out / "analytic_root.csv", root_cols, [row])
        xi = np.linspace(-20.0, root.xi_c_hat + 40.0, 2001)
        write_csv(out / "analytic_profile.csv", ["xi_hat", "rho"], zip(xi, profile_density(profile, xi)))
        print(f"xi_c_hat {root.xi_c_hat:.6f}  admissible {root.admissible}  validation {'ok' if report.ok else report.failures}")
    if cfg.scan:
        curve = []
        for chi in cfg.scan_chi_hat_values:
            try:
                curve.append((chi, find_xi_c(StiffWaveParams(chi, cfg.p, cfg.d), gamma_convention=conv).xi_c_hat))
            except NoRootError:
                curve.append((chi, math.nan))
        write_csv(out / "f_curve.csv", ["chi_hat", "xi_c_hat"], curve)
        region = []
        for p in np.linspace(0.05, 1.0, 96):
            sp = StiffWaveParams(cfg.chi_hat, float(p), cfg.d)
            for xc in np.linspace(0.1, 20.0, 200):
                region.append((xc, p, constraint_f(sp, xc), constraint_g(sp, xc), coefficients(sp, xc, conv).alpha))
        write_csv(out / "region.csv", ["xi_c_hat", "p", "f", "g", "alpha"], region)
    return 0


def cmd_compare(cfg: RunConfig):
    runs = [dataclasses.replace(cfg, stiffness=s) for s in cfg.compare_stiffness]
    results = _map(_simulate_compare, runs, cfg.max_parallel)
    rows = []
    for run_cfg, (r, xi_c) in zip(runs, results):
        # classification is irrelevant here; only unusable fits are flagged
        source = f"numeric:{r['status']}" if r["status"] in ("non-steady", "aborted") else "numeric"
        rows.append((run_cfg.stiffness, r["lambda_star_hat"], xi_c, source))
    try:
        root = find_xi_c(StiffWaveParams(cfg.chi_hat, cfg.p, cfg.d), gamma_convention=cfg.gamma_convention)
        # the region-(iii) tail is e^{-xi_hat}, i.e. lambda = sqrt(p)
        rows.append((math.inf, 1.0, root.xi_c_hat, "analytic"))
    except NoRootError:
        rows.append((math.inf, 1.0, math.nan, "analytic:no-root"))
    write_csv(Path(cfg.out_dir) / "compare.csv", ["stiffness", "lambda_over_sqrtp", "xi_c_hat", "source"], rows)
    for s, lam, xc, src in rows:
        print(f"stiffness {s:g}  lambda/sqrt(p) {lam:.4f}  xi_c_hat {xc:.4f}  {src}")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "converge": cmd_converge, "analytic": cmd_analytic, "compare": cmd_compare}

# per-command defaults applied beneath the preset
COMMAND_DEFAULTS = {"analytic": {"chi_hat": 2.5}, "compare": {"chi_hat": 2.5}}

FLAGS = [
    ("--chi-hat", "chi_hat"),
    ("--stiffness", "stiffness"),
    ("--d", "d"),
    ("--p", "p"),
    ("--L-hat", "L_hat"),
    ("--cells", "cells"),
    ("--L0-hat", "L0_hat"),
    ("--t-end", "t_end_hat"),
    ("--out", "out_dir"),
    ("--max-parallel", "max_parallel"),
    ("--fit-window", "fit_window"),
    ("--snapshot-every", "snapshot_every"),
    ("--chi-hat-values", "chi_hat_values"),
    ("--stiffness-values", "stiffness_values"),
    ("--cells-values", "cells_values"),
    ("--compare-stiffness", "compare_stiffness"),
    ("--gamma-convention", "gamma_convention"),
]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    for flag, key in FLAGS:
        common.add_argument(flag, dest=key, default=None, metavar="VALUE")
    common.add_argument("--config", default=None, help="key = value file")
    common.add_argument("--preset", choices=sorted(PRESETS), default=None)
    common.add_argument("--scan", action="store_true", default=None, help="analytic: also write f_curve.csv and region.csv")
    common.add_argument("-q", "--quiet", action="store_true")

    ap = argparse.ArgumentParser(prog="flks", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(func.__doc__ or name).splitlines()[0])
    return ap


cmd_run.__doc__ = "single simulation: snapshots, front trace, metrics"
cmd_sweep.__doc__ = "phase diagram over chi_hat_values x stiffness_values"
cmd_converge.__doc__ = "mesh-convergence table over cells_values"
cmd_analytic.__doc__ = "stiff-limit analytic wave: root, profile, optional scans"
cmd_compare.__doc__ = "decay rate and matching distance vs stiffness, plus the analytic row"


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        overrides = {key: getattr(args, key) for _, key in FLAGS if getattr(args, key) is not None}
        if args.scan:
            overrides["scan"] = "true"
        if args.preset:
            overrides["preset"] = args.preset
        file_values = read_config_file(args.config) if args.config else {}
        base = dict(COMMAND_DEFAULTS.get(args.command, {}))
        base.update(file_values)
        cfg = resolve_config(base, overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_resolved(cfg, out)
        return COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:
        log.exception("%s failed: %s", args.command, err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
