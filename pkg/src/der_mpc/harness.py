"""Closed-loop experiments: run the MPC loop over a forecast and score the result."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .battery import DerClassParams, FleetState, step_soc
from .data import ForecastProvider, ForecastSeries
from .mpc import MpcConfig, MpcController, MpcError, horizon_cost
from .qp import SolverSettings


@dataclass(frozen=True)
class Scenario:
    fleet: tuple[DerClassParams, ...]
    provider: ForecastProvider
    config: MpcConfig
    duration_steps: int
    initial_state: FleetState | None = None
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        object.__setattr__(self, "fleet", tuple(self.fleet))
        if not self.fleet:
            raise ValueError("scenario needs at least one DER class")
        if self.duration_steps <= 0 or self.duration_steps % self.config.shift_steps:
            raise ValueError(
                f"duration {self.duration_steps} steps is not a positive multiple of "
                f"t_s={self.config.shift_steps}"
            )
        need = self.duration_steps + self.config.horizon_steps
        if not self.provider.covers(need):
            raise ValueError(
                f"forecast covers {len(self.provider)} steps, scenario needs {need} (duration + horizon)"
            )
        if self.initial_state is None:
            object.__setattr__(self, "initial_state", FleetState.zeros(len(self.fleet)))
        elif len(self.initial_state) != len(self.fleet):
            raise ValueError("initial state size does not match the fleet")

    @property
    def violation_tol(self) -> float:
        return 10 * self.settings.eps_primal

    def with_fleet(self, fleet: Sequence[DerClassParams]) -> "Scenario":
        return replace(self, fleet=tuple(fleet))

    def scaled(self, factor: float) -> "Scenario":
        return self.with_fleet([par.scaled(factor) for par in self.fleet])

    def baseline(self) -> "Scenario":
        """Same scenario with every DER class switched off."""
        return self.scaled(0.0)


@dataclass(frozen=True)
class IterationStats:
    t0: int
    iterations: int
    polished: bool
    primal_residual: float
    dual_residual: float
    complementarity: float
    objective: float
    null_objective: float
    window_constant: bool
    solve_seconds: float = 0.0


@dataclass(frozen=True, eq=False)
class SimulationResult:
    ids: tuple[str, ...]
    start_time: datetime | None
    step_seconds: int
    step_hours: float
    load: np.ndarray     # realized net demand, length T
    g: np.ndarray        # bulk generation, length T
    p: np.ndarray        # M x T DER power
    x: np.ndarray        # M x (T + 1) SoC, x[:, t] at the start of step t
    metrics: dict
    stats: tuple[IterationStats, ...] = ()

    @property
    def duration_steps(self) -> int:
        return len(self.g)

    def balance_residual(self) -> float:
        return float(np.abs(self.load - self.g - self.p.sum(axis=0)).max())


def _all_disabled(fleet: Sequence[DerClassParams]) -> bool:
    return all(par.power_max_gw == 0 and par.power_min_gw == 0 for par in fleet)


def _null_cost(fleet, x0: np.ndarray, window: np.ndarray, lbar: float, kappa_g: float) -> float:
    """Cost of p = 0, g = l with the SoC decaying under leakage alone."""
    alphas = np.array([par.alpha for par in fleet])
    xs = x0[:, None] * alphas[:, None] ** np.arange(len(window) + 1)
    return horizon_cost(fleet, window, xs, lbar, kappa_g)


def run(scenario: Scenario) -> SimulationResult:
    """Execute ``duration / t_s`` MPC iterations.

    A fleet with every power limit at zero cannot act, so it is run as an
    exact pass-through (g = l, p = 0, SoC decaying under leakage) without a
    solver call.
    """
    cfg = scenario.config
    fleet = scenario.fleet
    M, T, ts = len(fleet), scenario.duration_steps, cfg.shift_steps
    load = np.empty(T)
    g = np.empty(T)
    p = np.zeros((M, T))
    x = np.empty((M, T + 1))
    x[:, 0] = scenario.initial_state.as_array()
    stats = []

    if _all_disabled(fleet):
        for t0 in range(0, T, ts):
            load[t0:t0 + ts] = scenario.provider.window(t0, cfg.horizon_steps)[:ts]
        g[:] = load
        for t in range(T):
            for i, par in enumerate(fleet):
                x[i, t + 1] = step_soc(par, x[i, t], 0.0)
    else:
        ctl = MpcController(fleet, cfg, scenario.settings, scenario.initial_state)
        enc = ctl.encoder
        for t0 in range(0, T, ts):
            x_start = ctl.state.as_array()
            tic = time.perf_counter()
            try:
                res = ctl.step(scenario.provider)
            except MpcError as exc:
                raise MpcError(f"MPC iteration {t0 // ts} (t0={t0}): {exc}", exc.solution, t0) from exc
            elapsed = time.perf_counter() - tic
            window = res.plan.forecast
            sol = res.plan.solution
            stats.append(IterationStats(
                t0=t0,
                iterations=sol.iterations,
                polished=sol.polished,
                primal_residual=sol.primal_residual,
                dual_residual=sol.dual_residual,
                complementarity=sol.complementarity,
                objective=res.plan.objective,
                null_objective=_null_cost(fleet, x_start, window, enc.lbar(window), cfg.kappa_g),
                window_constant=bool(np.ptp(window) == 0),
                solve_seconds=elapsed,
            ))
            load[t0:t0 + ts] = res.load
            g[t0:t0 + ts] = res.g
            p[:, t0:t0 + ts] = res.p
            x[:, t0 + 1:t0 + ts + 1] = res.x[:, 1:]

    base = scenario.provider.base
    result = SimulationResult(
        ids=tuple(par.id for par in fleet),
        start_time=base.start_time,
        step_seconds=base.step_seconds,
        step_hours=cfg.step_hours,
        load=load, g=g, p=p, x=x,
        metrics={},
        stats=tuple(stats),
    )
    object.__setattr__(result, "metrics", compute_metrics(result, fleet, scenario.violation_tol))
    return result


def compute_metrics(result: SimulationResult, fleet: Sequence[DerClassParams], tol: float) -> dict:
    dt = result.step_hours
    dg = np.abs(np.diff(result.g)) if result.duration_steps > 1 else np.zeros(1)
    dl = np.abs(np.diff(result.load)) if result.duration_steps > 1 else np.zeros(1)
    cap = np.array([par.soc_capacity_gwh for par in fleet])[:, None]
    pmax = np.array([par.power_max_gw for par in fleet])[:, None]
    pmin = np.array([par.power_min_gw for par in fleet])[:, None]
    m = {
        "max_ramp_g_gw_per_step": float(dg.max()),
        "max_ramp_load_gw_per_step": float(dl.max()),
        "max_ramp_g_gw_per_hour": float(dg.max() / dt),
        "max_ramp_load_gw_per_hour": float(dl.max() / dt),
        "ramp_ratio": float(dg.max() / dl.max()) if dl.max() > 0 else 1.0,
        "rms_g_deviation_gw": float(np.sqrt(np.mean((result.g - result.g.mean()) ** 2))),
        "rms_load_deviation_gw": float(np.sqrt(np.mean((result.load - result.load.mean()) ** 2))),
        "peak_g_gw": float(result.g.max()),
        "peak_load_gw": float(result.load.max()),
        "energy_g_gwh": float(result.g.sum() * dt),
        "energy_load_gwh": float(result.load.sum() * dt),
        "energy_der_gwh": float(result.p.sum() * dt),
        "max_balance_residual_gw": result.balance_residual(),
        "soc_violations": int(np.count_nonzero(np.abs(result.x) > cap + tol)),
        "power_violations": int(np.count_nonzero((result.p > pmax + tol) | (result.p < -pmin - tol))),
        "steps": result.duration_steps,
        "mpc_iterations": len(result.stats),
    }
    if result.stats:
        m["solver_iterations_total"] = int(sum(s.iterations for s in result.stats))
        m["solver_iterations_max"] = int(max(s.iterations for s in result.stats))
        m["solver_polished"] = int(sum(s.polished for s in result.stats))
        m["solver_max_primal_residual"] = float(max(s.primal_residual for s in result.stats))
        m["solver_max_dual_residual"] = float(max(s.dual_residual for s in result.stats))
    for i, pid in enumerate(result.ids):
        c = fleet[i].soc_capacity_gwh
        m[f"soc_peak_fraction.{pid}"] = float(np.abs(result.x[i]).max() / c) if c > 0 else 0.0
        m[f"energy_supplied_gwh.{pid}"] = float(result.p[i].sum() * dt)
    return m


def compare(result_a: SimulationResult, result_b: SimulationResult) -> dict:
    """Per-metric ``b - a`` and ``b / a`` plus the ramp reduction of b over a in percent."""
    if result_a.duration_steps != result_b.duration_steps:
        raise ValueError(
            f"cannot compare runs of {result_a.duration_steps} and {result_b.duration_steps} steps"
        )
    out = {}
    for key, va in result_a.metrics.items():
        if key not in result_b.metrics:
            continue
        vb = result_b.metrics[key]
        out[f"delta.{key}"] = vb - va
        if va != 0:
            out[f"ratio.{key}"] = vb / va
    ga = result_a.metrics["max_ramp_g_gw_per_step"]
    gb = result_b.metrics["max_ramp_g_gw_per_step"]
    out["ramp_reduction_pct"] = 100.0 * (1.0 - gb / ga) if ga > 0 else 0.0
    return out


# -- synthetic data --------------------------------------------------------------

def two_peak_load(steps: int, step_seconds: int = 300, mean_gw: float = 25.0,
                  noise_gw: float = 0.0, seed: int = 0) -> np.ndarray:
    """Daily net-demand shape with a morning and a larger evening peak."""
    h = np.arange(steps) * step_seconds / 3600.0
    phase = 2 * np.pi * h / 24.0
    shape = -4.0 * np.cos(phase - 2 * np.pi * 14 / 24) + 3.0 * np.cos(2 * phase - 2 * np.pi * 16 / 24)
    load = mean_gw + shape
    if noise_gw > 0:
        load = load + np.random.default_rng(seed).normal(0.0, noise_gw, steps)
    return load


def brd_like_disturbance(steps: int, std_gw: float = 0.3, corr: float = 0.9, seed: int = 0) -> np.ndarray:
    """Zero-mean AR(1) signal standing in for a balancing-reserve deployment record."""
    rng = np.random.default_rng(seed)
    shocks = rng.normal(0.0, std_gw * np.sqrt(1 - corr ** 2), steps)
    out = np.empty(steps)
    level = 0.0
    for k in range(steps):
        level = corr * level + shocks[k]
        out[k] = level
    return out


SYNTHETIC_START = datetime(2023, 9, 1)


def synthetic_provider(days: float, config: MpcConfig, step_seconds: int = 300, seed: int = 0,
                       noise_gw: float = 0.0, disturbance_std_gw: float = 0.3,
                       perturb_whole_horizon: bool = False) -> ForecastProvider:
    """Synthetic two-peak forecast covering ``days`` plus one horizon."""
    steps = int(round(days * 86400 / step_seconds)) + config.horizon_steps
    base = ForecastSeries(SYNTHETIC_START, step_seconds, two_peak_load(steps, step_seconds, noise_gw=noise_gw, seed=seed))
    dist = None
    if disturbance_std_gw > 0:
        dist = ForecastSeries(SYNTHETIC_START, step_seconds,
                              brd_like_disturbance(steps, disturbance_std_gw, seed=seed + 1))
    return ForecastProvider(base, dist, config.shift_steps, perturb_whole_horizon)


def synthetic_scenario(fleet: Sequence[DerClassParams], days: float = 1.0, config: MpcConfig | None = None,
                       settings: SolverSettings | None = None, **kwargs) -> Scenario:
    config = config or MpcConfig()
    step_seconds = int(round(config.step_hours * 3600))
    provider = synthetic_provider(days, config, step_seconds, **kwargs)
    duration = int(round(days * 86400 / step_seconds))
    duration -= duration % config.shift_steps
    return Scenario(tuple(fleet), provider, config, duration, settings=settings or SolverSettings())


# -- exports ----------------------------------------------------------------

def _num(v) -> str:
    return repr(float(v))


def write_trajectories(result: SimulationResult, path) -> None:
    """Wide CSV: time, load, generation, per-class power, per-class SoC at step start."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", "step", "load_gw", "g_gw"]
               + [f"p_{pid}_gw" for pid in result.ids] + [f"x_{pid}_gwh" for pid in result.ids])
    for t in range(result.duration_steps):
        stamp = "" if result.start_time is None else \
            (result.start_time + timedelta(seconds=t * result.step_seconds)).isoformat()
        w.writerow([stamp, t, _num(result.load[t]), _num(result.g[t])]
                   + [_num(v) for v in result.p[:, t]] + [_num(v) for v in result.x[:, t]])
    Path(path).write_text(buf.getvalue())


def format_metrics(metrics: dict) -> str:
    """``key = value`` lines sorted by key; floats use round-trip repr."""
    lines = []
    for key in sorted(metrics):
        v = metrics[key]
        lines.append(f"{key} = {v if isinstance(v, (int, np.integer)) and not isinstance(v, bool) else _num(v)}")
    return "\n".join(lines) + "\n"


def write_metrics(metrics: dict, path) -> None:
    Path(path).write_text(format_metrics(metrics))


def read_metrics(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        value = value.strip()
        out[key.strip()] = int(value) if value.lstrip("-").isdigit() else float(value)
    return out
