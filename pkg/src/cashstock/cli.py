"""Command-line front door: config ingestion, solver runs, CSV emission.

Subcommands: solve, tables, figures, simulate. Config is a JSON document;
see README for the schema. Every run writes a manifest listing the emitted
files; CSV bodies are deterministic for a fixed config and seed.

Exit codes: 0 success, 2 config error, 3 solver bracket/grid failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import single_period
from .bounds import compare_bounds, default_worth_grid, selling_back_dp
from .demand import Demand, DiscreteEmpirical, Uniform, ZeroInflatedPoisson
from .dp import Grid, GridEscapeError, backward_induct, policy_value_tables
from .model import HorizonSpec, PeriodParams, State, validate
from .sim import MyopicPolicy, ThresholdPolicy, run_policy
from .thresholds import BracketError, solve_thresholds

ENV_PREFIX = "CASHSTOCK_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    pass


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def parse_demand(spec, where: str) -> Demand:
    _require(isinstance(spec, dict) and "kind" in spec, f"{where}: demand needs a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "uniform":
            return Uniform(float(spec["lo"]), float(spec["hi"]))
        if kind == "zip":
            return ZeroInflatedPoisson(float(spec["pi"]), float(spec["lambda"]))
        if kind == "empirical":
            return DiscreteEmpirical(tuple(spec["values"]), tuple(spec["probs"]))
    except KeyError as exc:
        raise ConfigError(f"{where}: demand kind '{kind}' is missing field {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown demand kind '{kind}' "
                      "(expected uniform, zip, or empirical)")


def parse_period(spec, where: str) -> PeriodParams:
    _require(isinstance(spec, dict), f"{where}: period must be an object")
    missing = [k for k in ("p", "c", "h", "i", "l") if k not in spec]
    _require(not missing, f"{where}: period is missing field(s) {missing}")
    return PeriodParams(float(spec["p"]), float(spec["c"]), float(spec["h"]),
                        float(spec["i"]), float(spec["l"]))


@dataclass
class RunConfig:
    n_periods: int
    salvage: float
    periods: list[PeriodParams]
    demands: list[Demand]
    grid: Grid
    epsilon: float = 1e-3
    quadrature_nodes: int = 8
    mc_paths: int = 100_000
    seed: int = 0
    initial: tuple[float, float] = (0.0, 0.0)
    table_states: list[float] = field(default_factory=lambda: [0.0, 7.0, 14.0])
    table_horizons: list[int] = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    def horizon(self, demand: Demand | None = None, n_periods: int | None = None) -> HorizonSpec:
        n = n_periods or self.n_periods
        periods = list(self.periods) if len(self.periods) == n else [self.periods[0]] * n
        if demand is not None:
            demands = [demand] * n
        elif len(self.demands) in (1, n):
            demands = list(self.demands) if len(self.demands) == n else [self.demands[0]] * n
        else:
            raise ConfigError(
                f"demands must have 1 or N={n} entries for this command; "
                f"got {len(self.demands)} (a longer list is only meaningful as "
                "the scenario roster of 'tables')")
        horizon = HorizonSpec(periods, demands, self.salvage)
        report = validate(horizon)
        if not report.ok:
            raise ConfigError(f"invalid horizon:\n{report}")
        return horizon


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    _require(isinstance(raw, dict), "config root must be an object")
    for key in ("N", "salvage", "periods", "demands", "grid"):
        _require(key in raw, f"config is missing required field '{key}'")
    n = int(raw["N"])
    _require(n >= 1, "N must be at least 1")
    periods_raw = raw["periods"]
    _require(isinstance(periods_raw, list) and periods_raw, "periods must be a nonempty list")
    _require(len(periods_raw) in (1, n), f"periods must have 1 or N={n} entries")
    demands_raw = raw["demands"]
    _require(isinstance(demands_raw, list) and demands_raw, "demands must be a nonempty list")
    periods = [parse_period(p, f"periods[{k}]") for k, p in enumerate(periods_raw)]
    demands = [parse_demand(d, f"demands[{k}]") for k, d in enumerate(demands_raw)]

    g = raw["grid"]
    for key in ("x_max", "y_min", "y_max", "nx", "ny"):
        _require(key in g, f"grid is missing field '{key}'")
    solver = raw.get("solver", {})
    overrides = overrides or {}
    scale = float(overrides.get("grid_scale", 1.0))
    nx = max(2, int(round((int(g["nx"]) - 1) * scale)) + 1)
    ny = max(2, int(round((int(g["ny"]) - 1) * scale)) + 1)
    _require(float(g["y_min"]) < float(g["y_max"]), "grid needs y_min < y_max")
    _require(float(g["x_max"]) > 0, "grid needs x_max > 0")
    grid = Grid.regular(float(g["x_max"]), float(g["y_min"]), float(g["y_max"]), nx, ny)

    cfg = RunConfig(
        n_periods=n,
        salvage=float(raw["salvage"]),
        periods=periods,
        demands=demands,
        grid=grid,
        epsilon=float(overrides.get("epsilon", solver.get("epsilon", 1e-3))),
        quadrature_nodes=int(solver.get("quadrature_nodes", 8)),
        mc_paths=int(overrides.get("paths", solver.get("mc_paths", 100_000))),
        seed=int(overrides.get("seed", solver.get("seed", 0))),
        initial=tuple(raw.get("initial", (0.0, 0.0))),
        table_states=[float(v) for v in raw.get("table_states", [0.0, 7.0, 14.0])],
        table_horizons=[int(v) for v in raw.get("table_horizons", [n, 2 * n])],
        raw=raw,
    )
    # per-scenario horizons are validated when commands build them
    for dem in demands:
        probe = HorizonSpec([periods[0]] * 1, [dem], cfg.salvage)
        report = validate(probe)
        _require(report.ok, f"invalid economics for demand {dem.label}:\n{report}")
    return cfg


def config_hash(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _fmt(x) -> str:
    return f"{float(x):.6g}"


class Emitter:
    """Writes CSVs into the output directory and records them for the manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, header: list[str], rows) -> None:
        lines = [",".join(header)]
        lines += [",".join(_fmt(v) if not isinstance(v, str) else v for v in row)
                  for row in rows]
        (self.out_dir / name).write_text("\n".join(lines) + "\n")
        self.files.append(name)

    def write_manifest(self, command: str, cfg: RunConfig) -> None:
        manifest = {
            "command": command,
            "config_hash": config_hash(cfg.raw),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "solver": {
                "epsilon": cfg.epsilon,
                "quadrature_nodes": cfg.quadrature_nodes,
                "mc_paths": cfg.mc_paths,
                "seed": cfg.seed,
                "grid_shape": list(cfg.grid.shape),
            },
            "outputs": sorted(self.files),
        }
        (self.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def cmd_solve(cfg: RunConfig, out: Emitter) -> int:
    horizon = cfg.horizon()
    initial = [cfg.initial] if cfg.raw.get("check_reachability", False) else None
    solution = backward_induct(horizon, cfg.grid, order=cfg.quadrature_nodes,
                               initial_states=initial)
    table = solve_thresholds(horizon, cfg.grid, solution=solution, epsilon=cfg.epsilon,
                             order=cfg.quadrature_nodes)
    xs, ys = cfg.grid.x_nodes, cfg.grid.y_nodes
    for n in range(1, horizon.n_periods + 1):
        vt, pt = solution.value(n), solution.policy(n)
        rows = ((x, y, vt.values[i, j], pt.order_up_to[i, j], pt.order_up_to[i, j] - x)
                for i, x in enumerate(xs) for j, y in enumerate(ys))
        out.write_csv(f"value_period_{n}.csv", ["x", "y", "value", "order_up_to", "q"], rows)
    thr_rows = []
    for row in table.periods:
        for k, w in enumerate(row.worth):
            thr_rows.append((row.n, w, row.lower.borrow, row.borrow[k], row.upper.borrow,
                             row.lower.deposit, row.deposit[k], row.upper.deposit))
    out.write_csv("thresholds.csv",
                  ["period", "net_worth", "borrow_lo", "borrow", "borrow_hi",
                   "deposit_lo", "deposit", "deposit_hi"], thr_rows)
    x0, y0 = cfg.initial
    print(f"solved {horizon.n_periods} periods; "
          f"V_1({_fmt(x0)},{_fmt(y0)}) = {_fmt(solution.value(1)(x0, y0))}")
    return EXIT_OK


def cmd_tables(cfg: RunConfig, out: Emitter, which: str) -> int:
    if which == "table1":
        rows = []
        for dem in cfg.demands:
            horizon = cfg.horizon(demand=dem)
            solution = backward_induct(horizon, cfg.grid, order=cfg.quadrature_nodes)
            x0, y0 = cfg.initial
            v = float(solution.value(1)(x0, y0))
            vals = {}
            for kind in ("lower", "upper"):
                tabs = policy_value_tables(horizon, cfg.grid, MyopicPolicy(horizon, kind),
                                           order=cfg.quadrature_nodes)
                vals[kind] = float(tabs[0](x0, y0))
            m = dem.moments()
            rows.append((dem.label, m.cv, v,
                         vals["lower"], 100.0 * (v - vals["lower"]) / v,
                         vals["upper"], 100.0 * (v - vals["upper"]) / v))
        out.write_csv("table1.csv",
                      ["demand", "cv", "v_opt", "v_myopic_lower", "gap_lower_pct",
                       "v_myopic_upper", "gap_upper_pct"], rows)
        return EXIT_OK
    # table2: bound chain per horizon length, demand, and inventory state
    rows = []
    for n in cfg.table_horizons:
        for dem in cfg.demands:
            horizon = cfg.horizon(demand=dem, n_periods=n)
            states = [(x, 0.0) for x in cfg.table_states]
            report = compare_bounds(horizon, cfg.grid, states, order=cfg.quadrature_nodes)
            for r in report.rows:
                rows.append((n, dem.label, r.x, r.optimal,
                             r.lower, r.lower_gap, r.lower_gap_pct,
                             r.upper, r.upper_gap, r.upper_gap_pct))
    out.write_csv("table2.csv",
                  ["N", "demand", "x", "v_opt", "v_lower", "gap_lower", "gap_lower_pct",
                   "v_upper", "gap_upper", "gap_upper_pct"], rows)
    return EXIT_OK


def cmd_figures(cfg: RunConfig, out: Emitter) -> int:
    horizon = cfg.horizon()
    params, demand = horizon.period(1), horizon.demand_in(1)
    bands = single_period.order_bands(single_period.fractiles(params, cfg.salvage), demand)
    ys = np.linspace(-bands.deposit, 2.0 * bands.deposit, 241)
    out.write_csv("fig_order_quantity.csv", ["y", "q"],
                  ((y, q) for y, q in zip(ys, single_period.optimal_order(0.0, ys, bands))))

    solution = backward_induct(horizon, cfg.grid, order=cfg.quadrature_nodes)
    vt = solution.value(1)
    xi = np.linspace(0, len(cfg.grid.x_nodes) - 1, min(41, len(cfg.grid.x_nodes))).astype(int)
    yi = np.linspace(0, len(cfg.grid.y_nodes) - 1, min(41, len(cfg.grid.y_nodes))).astype(int)
    out.write_csv("fig_value_surface.csv", ["x", "y", "value"],
                  ((cfg.grid.x_nodes[i], cfg.grid.y_nodes[j], vt.values[i, j])
                   for i in xi for j in yi))

    worth = default_worth_grid(cfg.grid)
    rows = []
    for n in (1, 2, 4, 6):
        tables = selling_back_dp(cfg.horizon(n_periods=n), worth, order=cfg.quadrature_nodes)
        rows += [(n, w, v) for w, v in zip(worth, tables[0].values)]
    out.write_csv("fig_selling_back.csv", ["N", "net_worth", "value"], rows)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Emitter) -> int:
    horizon = cfg.horizon()
    solution = backward_induct(horizon, cfg.grid, order=cfg.quadrature_nodes)
    table = solve_thresholds(horizon, cfg.grid, solution=solution, epsilon=cfg.epsilon,
                             order=cfg.quadrature_nodes)
    initial = State(*cfg.initial)
    policies = [ThresholdPolicy(table, label="optimal-thresholds"),
                MyopicPolicy(horizon, "lower"), MyopicPolicy(horizon, "upper")]
    rows = []
    for policy in policies:
        res = run_policy(horizon, policy, initial, cfg.mc_paths, cfg.seed)
        rows.append((res.label, res.mean, res.half_width, res.paths))
        print(f"{res.label}: {_fmt(res.mean)} +/- {_fmt(res.half_width)} "
              f"({res.paths} paths)")
    out.write_csv("simulation.csv", ["policy", "mean", "half_width", "paths"], rows)
    return EXIT_OK


def _env_default(name: str, fallback=None):
    return os.environ.get(ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cashstock",
        description="Joint ordering/financing policies for cash-constrained inventory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "solve the horizon and dump value/policy/threshold tables"),
        ("tables", "emit the optimality-gap or bound-comparison table"),
        ("figures", "emit plot data (policy curve, value surface, relaxation curves)"),
        ("simulate", "Monte Carlo evaluation of the solved and myopic policies"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=_env_default("CONFIG"), required=False)
        p.add_argument("--out", default=_env_default("OUT", "out"))
        p.add_argument("--seed", type=int, default=_env_default("SEED"))
        p.add_argument("--paths", type=int, default=_env_default("PATHS"))
        p.add_argument("--grid-scale", type=float, default=_env_default("GRID_SCALE"))
        p.add_argument("--epsilon", type=float, default=_env_default("EPSILON"))
        if name == "tables":
            p.add_argument("--which", choices=["table1", "table2"], default="table1")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.config:
        print("error: --config is required (or set CASHSTOCK_CONFIG)", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {k: v for k, v in {
        "seed": args.seed, "paths": args.paths,
        "grid_scale": args.grid_scale, "epsilon": args.epsilon,
    }.items() if v is not None}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Emitter(Path(args.out))
    try:
        if args.command == "solve":
            code = cmd_solve(cfg, out)
        elif args.command == "tables":
            code = cmd_tables(cfg, out, args.which)
        elif args.command == "figures":
            code = cmd_figures(cfg, out)
        else:
            code = cmd_simulate(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketError, GridEscapeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out.write_manifest(args.command, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
