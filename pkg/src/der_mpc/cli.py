"""Command-line entry point.

    der-mpc run      --config run.cfg [overrides]   closed-loop MPC run
    der-mpc baseline --config run.cfg [overrides]   same scenario with DERs disabled
    der-mpc derive   tcl.cfg                        aggregate limits from TCL parameters

Config files are flat ``key = value`` text with ``#`` comments; relative
paths resolve against the config file's directory. Command-line flags
override config values.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .battery import TclParams, derive_class, load_fleet, table1_fleet
from .data import DataError, ForecastProvider, load_csv, resample
from .harness import (
    Scenario,
    run,
    synthetic_provider,
    write_metrics,
    write_trajectories,
)
from .mpc import MpcConfig
from .qp import SolverError, SolverSettings

log = logging.getLogger("der_mpc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    fleet: Path | None = None
    net_demand: Path | None = None
    disturbance: Path | None = None
    out_dir: Path = Path("out")
    tau_hours: float = 24.0
    shift_minutes: float = 30.0
    kappa_g: float = 10.0
    tol: float = 1e-6
    max_iter: int = 50_000
    step_seconds: int = 300
    duration_hours: float | None = None
    time_column: str = "timestamp"
    net_demand_column: str = "value_gw"
    net_demand_scale: float = 1.0
    disturbance_column: str = "value_gw"
    disturbance_scale: float = 1.0
    perturb_whole_horizon: bool = False
    synthetic: bool = False
    synthetic_days: float = 1.0
    synthetic_noise_gw: float = 0.0
    synthetic_disturbance_gw: float = 0.3
    seed: int = 0

    def steps(self, hours: float, label: str) -> int:
        value = hours * 3600.0 / self.step_seconds
        if value != int(value):
            raise ConfigError(f"{label} of {hours} h is not a whole number of {self.step_seconds} s steps")
        return int(value)

    def mpc_config(self) -> MpcConfig:
        tau = self.steps(self.tau_hours, "tau_hours")
        ts = self.steps(self.shift_minutes / 60.0, "shift_minutes")
        if not 0 < ts <= tau:
            raise ConfigError(
                f"time shift must satisfy 0 < t_s <= tau (got t_s = {self.shift_minutes} min, "
                f"tau = {self.tau_hours} h)"
            )
        try:
            return MpcConfig(tau, ts, self.kappa_g, self.step_seconds / 3600.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_settings(self) -> SolverSettings:
        try:
            return SolverSettings(eps_primal=self.tol, eps_dual=self.tol, max_iter=self.max_iter)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_PATH_KEYS = {"fleet", "net_demand", "disturbance", "out_dir"}


def _convert(name: str, raw: str, base: Path | None):
    field = {f.name: f for f in fields(RunConfig)}[name]
    kind = str(field.type)
    raw = raw.strip()
    if name in _PATH_KEYS:
        path = Path(raw).expanduser()
        return path if path.is_absolute() or base is None else base / path
    try:
        if kind.startswith("bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.split()[0]}") from None
    return raw


def parse_key_values(text: str, source: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_run_config(path: Path | None, overrides: dict | None = None) -> RunConfig:
    """Config file values, then ``overrides`` (already typed) on top."""
    values = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        known = {f.name for f in fields(RunConfig)}
        for key, raw in parse_key_values(text, str(path)).items():
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r}")
            values[key] = _convert(key, raw, path.parent)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(**values)


def build_scenario(cfg: RunConfig, disable_ders: bool = False) -> Scenario:
    mpc = cfg.mpc_config()
    settings = cfg.solver_settings()
    if cfg.fleet is not None:
        if not cfg.fleet.is_file():
            raise DataError(f"fleet file not found: {cfg.fleet}")
        fleet = load_fleet(cfg.fleet)
    else:
        fleet = table1_fleet()
    if cfg.synthetic:
        provider = synthetic_provider(
            cfg.synthetic_days, mpc, cfg.step_seconds, seed=cfg.seed,
            noise_gw=cfg.synthetic_noise_gw, disturbance_std_gw=cfg.synthetic_disturbance_gw,
            perturb_whole_horizon=cfg.perturb_whole_horizon,
        )
        default_hours = cfg.synthetic_days * 24.0
    else:
        if cfg.net_demand is None:
            raise ConfigError("no net-demand file given (set net_demand or use --synthetic)")
        base = _load_series(cfg.net_demand, cfg.net_demand_column, cfg.net_demand_scale, cfg)
        dist = None
        if cfg.disturbance is not None:
            dist = _load_series(cfg.disturbance, cfg.disturbance_column, cfg.disturbance_scale, cfg)
        provider = ForecastProvider(base, dist, mpc.shift_steps, cfg.perturb_whole_horizon)
        default_hours = None
    if cfg.duration_hours is not None:
        duration = cfg.steps(cfg.duration_hours, "duration_hours")
    elif default_hours is not None:
        duration = int(round(default_hours * 3600 / cfg.step_seconds))
    else:
        duration = len(provider) - mpc.horizon_steps
    duration -= duration % mpc.shift_steps
    if duration <= 0:
        raise DataError(
            f"forecast of {len(provider)} steps is too short for a {mpc.horizon_steps}-step horizon"
        )
    if not provider.covers(duration + mpc.horizon_steps):
        raise DataError(
            f"forecast covers {len(provider)} steps; {duration} + {mpc.horizon_steps} needed"
        )
    if disable_ders:
        fleet = [par.scaled(0.0) for par in fleet]
    return Scenario(tuple(fleet), provider, mpc, duration, settings=settings)


def _load_series(path: Path, column: str, scale: float, cfg: RunConfig):
    series = load_csv(path, value_column=column, time_column=cfg.time_column, scale=scale)
    if series.step_seconds != cfg.step_seconds:
        log.info("resampling %s from %d s to %d s", path, series.step_seconds, cfg.step_seconds)
        series = resample(series, cfg.step_seconds)
    return series


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "net_demand": args.net_demand,
        "disturbance": args.disturbance,
        "out_dir": args.out_dir,
        "tau_hours": args.tau_hours,
        "shift_minutes": args.shift_minutes,
        "kappa_g": args.kappa_g,
        "tol": args.tol,
        "fleet": args.fleet,
        "duration_hours": args.duration_hours,
        "seed": args.seed,
        "synthetic": True if args.synthetic else None,
    }


def _simulate(args: argparse.Namespace, disable_ders: bool, prefix: str) -> int:
    try:
        cfg = load_run_config(args.config, _overrides(args))
        cfg.mpc_config()
        cfg.solver_settings()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        scenario = build_scenario(cfg, disable_ders)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        result = run(scenario)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        traj = cfg.out_dir / f"{prefix}trajectories.csv"
        metrics = cfg.out_dir / f"{prefix}metrics.txt"
        write_trajectories(result, traj)
        write_metrics(result.metrics, metrics)
    except OSError as exc:
        print(f"data error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_DATA
    m = result.metrics
    print(f"wrote {traj} and {metrics}")
    print(
        f"max ramp g {m['max_ramp_g_gw_per_step']:.4f} GW/step vs load "
        f"{m['max_ramp_load_gw_per_step']:.4f} GW/step (ratio {m['ramp_ratio']:.3f}); "
        f"violations soc={m['soc_violations']} power={m['power_violations']}"
    )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    return _simulate(args, disable_ders=False, prefix="")


def cmd_baseline(args: argparse.Namespace) -> int:
    return _simulate(args, disable_ders=True, prefix="baseline_")


_TCL_KEYS = {
    "n_devices": "n_devices", "lambda": "lambda_", "gamma": "gamma",
    "theta_plus": "theta_plus", "theta_minus": "theta_minus", "theta_ambient": "theta_ambient",
    "p_on_gw": "p_on_gw", "t_on": "t_on", "t_off": "t_off",
}


def cmd_derive(args: argparse.Namespace) -> int:
    try:
        raw = parse_key_values(Path(args.tcl_file).read_text(), str(args.tcl_file))
    except OSError as exc:
        print(f"data error: cannot read {args.tcl_file}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    extra = set(raw) - set(_TCL_KEYS) - {"id", "kappa", "beta_seconds"}
    missing = set(_TCL_KEYS) - set(raw)
    try:
        if extra:
            raise ValueError(f"unknown keys {sorted(extra)}")
        if missing:
            raise ValueError(f"missing keys {sorted(missing)}")
        tcl = TclParams(**{_TCL_KEYS[k]: float(raw[k]) for k in _TCL_KEYS})
        derived = derive_class(
            tcl, raw.get("id", "derived"), float(raw.get("kappa", 1.0)), float(raw.get("beta_seconds", 300.0))
        )
    except ValueError as exc:
        print(f"config error: invalid TCL parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"id = {derived.id}")
    print(f"alpha = {derived.alpha!r}")
    print(f"capacity_gwh = {derived.soc_capacity_gwh!r}")
    print(f"eta_plus_gw = {derived.power_max_gw!r}")
    print(f"eta_minus_gw = {derived.power_min_gw!r}")
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value run configuration")
    p.add_argument("--net-demand", type=Path, help="net-demand CSV (timestamp, value_gw)")
    p.add_argument("--disturbance", type=Path, help="disturbance CSV added to each window head")
    p.add_argument("--fleet", type=Path, help="DER class file (defaults to the stock five classes)")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--tau-hours", type=float, help="horizon length in hours")
    p.add_argument("--shift-minutes", type=float, help="time shift between iterations in minutes")
    p.add_argument("--kappa-g", type=float, help="generation cost weight")
    p.add_argument("--tol", type=float, help="solver primal/dual tolerance")
    p.add_argument("--duration-hours", type=float, help="simulated span (default: all available data)")
    p.add_argument("--seed", type=int, help="seed for the synthetic scenario")
    p.add_argument("--synthetic", action="store_true", help="use the built-in two-peak scenario")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="der-mpc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="closed-loop MPC simulation")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)
    p_base = sub.add_parser("baseline", help="same scenario with all DERs disabled")
    _add_run_flags(p_base)
    p_base.set_defaults(func=cmd_baseline)
    p_der = sub.add_parser("derive", help="aggregate DER class limits from TCL parameters")
    p_der.add_argument("tcl_file", type=Path)
    p_der.set_defaults(func=cmd_derive)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
