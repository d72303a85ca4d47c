"""Receding-horizon allocation of DER aggregations.

Each iteration solves, over a window of ``tau`` steps starting at ``t0``,

    minimize   sum_t  kappa_g/2 (g(t) - lbar)^2 + sum_i kappa_i/2 x_i(t)^2
    subject to l(t) = g(t) + sum_i p_i(t)
               x_i(t+1) = alpha_i x_i(t) - beta_i p_i(t),   x_i(t0) given
               |x_i(t)| <= C_i,   -eta_minus_i <= p_i(t) <= eta_plus_i

where the cost runs over t0 .. t0+tau-1 and the terminal state x(t0+tau) is
bounded but not costed. ``lbar`` defaults to the mean of the window.

Decision vector layout (stable, see :class:`Layout`):
``[g(0..tau-1), p_1(0..tau-1), ..., p_M(..), x_1(0..tau), ..., x_M(0..tau)]``.
Equality rows: ``tau`` balance rows, then ``tau`` dynamics rows per class,
then one initial-state row per class.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from .battery import DerClassParams, FleetState, step_soc
from .qp import QpProblem, QpSolution, QpSolver, SolverError, SolverSettings, WarmStart, validate_solution


@dataclass(frozen=True)
class MpcConfig:
    horizon_steps: int = 288
    shift_steps: int = 6
    kappa_g: float = 10.0
    step_hours: float = 1.0 / 12.0
    lbar_override: float | None = None

    def __post_init__(self):
        if not 0 < self.shift_steps <= self.horizon_steps:
            raise ValueError(
                f"need 0 < t_s <= tau, got t_s={self.shift_steps} steps, tau={self.horizon_steps} steps"
            )
        if self.kappa_g < 0:
            raise ValueError(f"kappa_g must be nonnegative, got {self.kappa_g}")
        if not self.step_hours > 0:
            raise ValueError(f"step_hours must be positive, got {self.step_hours}")


class MpcError(SolverError):
    def __init__(self, message, solution=None, t0=None):
        super().__init__(message, solution)
        self.t0 = t0


@dataclass(frozen=True)
class Layout:
    tau: int
    num_classes: int

    @property
    def num_vars(self) -> int:
        return self.tau + self.num_classes * self.tau + self.num_classes * (self.tau + 1)

    @property
    def num_eq(self) -> int:
        return self.tau + self.num_classes * self.tau + self.num_classes

    @property
    def g(self) -> slice:
        return slice(0, self.tau)

    def p(self, i: int) -> slice:
        start = self.tau * (1 + i)
        return slice(start, start + self.tau)

    def x(self, i: int) -> slice:
        start = self.tau * (1 + self.num_classes) + i * (self.tau + 1)
        return slice(start, start + self.tau + 1)

    def var_blocks(self):
        return [self.g] + [self.p(i) for i in range(self.num_classes)] + [self.x(i) for i in range(self.num_classes)]

    def eq_blocks(self):
        tau = self.tau
        return [slice(0, tau)] + [slice(tau * (1 + i), tau * (2 + i)) for i in range(self.num_classes)]

    def shift(self, z: np.ndarray, steps: int, blocks) -> np.ndarray:
        """Advance each block by ``steps``, repeating its last entry as padding."""
        out = np.array(z, dtype=float, copy=True)
        for blk in blocks:
            seg = z[blk]
            k = min(steps, len(seg) - 1)
            out[blk] = np.concatenate([seg[k:], np.repeat(seg[-1:], k)])
        return out


def horizon_cost(fleet: Sequence[DerClassParams], g, x, lbar: float, kappa_g: float) -> float:
    """Running cost of a trajectory; ``x`` has tau+1 columns, the last one uncosted."""
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    kappa = np.array([par.kappa for par in fleet])
    cost_g = 0.5 * kappa_g * np.sum((g - lbar) ** 2)
    cost_x = 0.5 * np.sum(kappa[:, None] * x[:, :-1] ** 2)
    return float(cost_g + cost_x)


class HorizonEncoder:
    """Builds the horizon QP. The matrices depend only on fleet and horizon and are built once."""

    def __init__(self, fleet: Sequence[DerClassParams], config: MpcConfig, state_tol: float = 1e-9):
        if not fleet:
            raise ValueError("fleet must contain at least one DER class")
        self.fleet = tuple(fleet)
        self.config = config
        self.state_tol = state_tol
        self.layout = Layout(config.horizon_steps, len(fleet))
        self.P, self.A, self.lower, self.upper = self._matrices()

    def _matrices(self):
        lay = self.layout
        tau, M = lay.tau, lay.num_classes
        n = lay.num_vars
        diag = np.zeros(n)
        diag[lay.g] = self.config.kappa_g
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        t = np.arange(tau)
        for i, par in enumerate(self.fleet):
            xs = lay.x(i)
            diag[xs.start:xs.start + tau] = par.kappa
            lower[lay.p(i)] = -par.power_min_gw
            upper[lay.p(i)] = par.power_max_gw
            # x(t0) is pinned by its own equality row and left unbounded here
            lower[xs.start + 1:xs.stop] = -par.soc_capacity_gwh
            upper[xs.start + 1:xs.stop] = par.soc_capacity_gwh
        # balance: g(t) + sum_i p_i(t) = l(t)
        put(t, lay.g.start + t, np.ones(tau))
        for i in range(M):
            put(t, lay.p(i).start + t, np.ones(tau))
        # dynamics: x_i(t+1) - alpha x_i(t) + beta p_i(t) = 0
        for i, par in enumerate(self.fleet):
            r = tau * (1 + i) + t
            xs = lay.x(i).start
            put(r, xs + t + 1, np.ones(tau))
            put(r, xs + t, np.full(tau, -par.alpha))
            put(r, lay.p(i).start + t, np.full(tau, par.beta_hours))
        # initial state
        init_rows = tau * (1 + M) + np.arange(M)
        put(init_rows, np.array([lay.x(i).start for i in range(M)]), np.ones(M))
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(lay.num_eq, n),
        )
        return sp.diags(diag, format="csc"), A, lower, upper

    def lbar(self, forecast) -> float:
        if self.config.lbar_override is not None:
            return float(self.config.lbar_override)
        return float(np.mean(forecast))

    def encode(self, x0: FleetState, forecast) -> QpProblem:
        lay = self.layout
        forecast = np.asarray(forecast, dtype=float)
        if forecast.shape != (lay.tau,):
            raise ValueError(f"forecast window has length {forecast.size}, expected tau={lay.tau}")
        soc = x0.as_array()
        if soc.shape != (lay.num_classes,):
            raise ValueError(f"initial state has {soc.size} entries for {lay.num_classes} classes")
        for par, value in zip(self.fleet, soc):
            if abs(value) > par.soc_capacity_gwh + self.state_tol:
                raise ValueError(
                    f"initial SoC {value:g} GWh of {par.id} exceeds capacity {par.soc_capacity_gwh:g} GWh"
                )
        q = np.zeros(lay.num_vars)
        q[lay.g] = -self.config.kappa_g * self.lbar(forecast)
        b = np.concatenate([forecast, np.zeros(lay.num_classes * lay.tau), soc])
        return QpProblem(self.P, q, self.A, b, self.lower, self.upper)


def build_qp(fleet: Sequence[DerClassParams], x0: FleetState, forecast_window, config: MpcConfig) -> QpProblem:
    return HorizonEncoder(fleet, config).encode(x0, forecast_window)


@dataclass(frozen=True)
class HorizonPlan:
    g: np.ndarray
    p: np.ndarray
    x: np.ndarray
    objective: float
    lbar: float
    solution: QpSolution
    t0: int = 0
    forecast: np.ndarray | None = field(default=None, repr=False)

    @property
    def balance_residual(self) -> float:
        return float(np.abs(self.forecast - self.g - self.p.sum(axis=0)).max())


def decode(encoder: HorizonEncoder, solution: QpSolution, forecast, t0: int = 0) -> HorizonPlan:
    lay = encoder.layout
    z = solution.z
    g = z[lay.g].copy()
    p = np.stack([z[lay.p(i)] for i in range(lay.num_classes)])
    x = np.stack([z[lay.x(i)] for i in range(lay.num_classes)])
    lbar = encoder.lbar(forecast)
    cost = horizon_cost(encoder.fleet, g, x, lbar, encoder.config.kappa_g)
    return HorizonPlan(g, p, x, cost, lbar, solution, t0, np.asarray(forecast, dtype=float))


def plan_horizon(
    fleet: Sequence[DerClassParams],
    x0: FleetState,
    forecast_window,
    config: MpcConfig,
    settings: SolverSettings | None = None,
    *,
    encoder: HorizonEncoder | None = None,
    solver: QpSolver | None = None,
    warm_start: WarmStart | None = None,
) -> HorizonPlan:
    encoder = encoder or HorizonEncoder(fleet, config)
    solver = solver or QpSolver(settings)
    problem = encoder.encode(x0, forecast_window)
    sol = solver.solve(problem, warm_start)
    if not sol.optimal:
        raise MpcError(
            f"horizon solve at t0={x0.time_index} ended {sol.status.value} after {sol.iterations} "
            f"iterations (primal {sol.primal_residual:.3g}, dual {sol.dual_residual:.3g})",
            sol,
            x0.time_index,
        )
    if all(par.power_max_gw == 0 and par.power_min_gw == 0 for par in encoder.fleet):
        sol = _pinned_solution(encoder, problem, sol, x0, forecast_window)
    return decode(encoder, sol, forecast_window, x0.time_index)


def _pinned_solution(encoder, problem, sol, x0, forecast) -> QpSolution:
    """Exact optimum for a fleet that cannot act.

    With every power limit at zero the feasible set is one point: p = 0,
    g = l and the SoC decaying under leakage. It replaces the iterate so the
    plan carries no round-off; the solver's multipliers are kept.
    """
    lay = encoder.layout
    z = np.zeros(lay.num_vars)
    z[lay.g] = forecast
    for i, par in enumerate(encoder.fleet):
        xs = np.empty(lay.tau + 1)
        xs[0] = x0.soc_gwh[i]
        for k in range(lay.tau):
            xs[k + 1] = step_soc(par, xs[k], 0.0)
        z[lay.x(i)] = xs
    rep = validate_solution(problem, z, y_eq=sol.y_eq, y_box=sol.y_box)
    return replace(sol, z=z, objective=rep.objective, primal_residual=rep.primal,
                   dual_residual=rep.stationarity, complementarity=rep.complementarity)


class ForecastSource(Protocol):
    def window(self, t0: int, tau: int) -> np.ndarray: ...


@dataclass(frozen=True)
class StepResult:
    t0: int
    p: np.ndarray          # M x t_s applied inputs
    g: np.ndarray          # t_s planned generation over the applied steps
    load: np.ndarray       # t_s net demand seen by the balance rows
    x: np.ndarray          # M x (t_s + 1) realized states, starting at t0
    state: FleetState
    plan: HorizonPlan


class MpcController:
    """Sequential receding-horizon loop holding the true fleet state."""

    def __init__(
        self,
        fleet: Sequence[DerClassParams],
        config: MpcConfig,
        settings: SolverSettings | None = None,
        initial_state: FleetState | None = None,
        warm_start: bool = True,
    ):
        self.fleet = tuple(fleet)
        self.config = config
        self.solver = QpSolver(settings)
        # states reached through a plan may sit on a bound up to the solver tolerance
        self.encoder = HorizonEncoder(self.fleet, config, 10 * self.solver.settings.eps_primal)
        self.state = initial_state if initial_state is not None else FleetState.zeros(len(self.fleet))
        if len(self.state) != len(self.fleet):
            raise ValueError("initial state size does not match the fleet")
        self.use_warm_start = warm_start
        self._previous: QpSolution | None = None

    @property
    def t0(self) -> int:
        return self.state.time_index

    def _warm_start(self) -> WarmStart | None:
        prev = self._previous
        if prev is None or not self.use_warm_start:
            return None
        lay = self.encoder.layout
        ts = self.config.shift_steps
        z = lay.shift(prev.z, ts, lay.var_blocks())
        y_box = lay.shift(prev.y_box, ts, lay.var_blocks())
        y_eq = lay.shift(prev.y_eq, ts, lay.eq_blocks())
        return WarmStart(z, y_eq, y_box)

    def step(self, provider: ForecastSource) -> StepResult:
        cfg = self.config
        t0 = self.t0
        window = np.asarray(provider.window(t0, cfg.horizon_steps), dtype=float)
        plan = plan_horizon(
            self.fleet, self.state, window, cfg,
            encoder=self.encoder, solver=self.solver, warm_start=self._warm_start(),
        )
        ts = cfg.shift_steps
        applied = plan.p[:, :ts].copy()
        xs = np.empty((len(self.fleet), ts + 1))
        xs[:, 0] = self.state.as_array()
        for k in range(ts):
            for i, par in enumerate(self.fleet):
                xs[i, k + 1] = step_soc(par, xs[i, k], applied[i, k])
        self.state = FleetState.from_array(xs[:, -1], t0 + ts)
        self._previous = plan.solution
        return StepResult(t0, applied, plan.g[:ts].copy(), window[:ts].copy(), xs, self.state, plan)


def mpc_step(controller: MpcController, provider: ForecastSource) -> StepResult:
    return controller.step(provider)
