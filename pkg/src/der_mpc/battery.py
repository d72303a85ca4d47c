"""Generalized battery model for DER aggregations.

Each aggregation is a first-order leaky integrator

    x(t+1) = alpha * x(t) - beta * p(t),   |x| <= C,   -eta_minus <= p <= eta_plus

with x in GWh, p in GW and beta in hours. Positive p means the aggregation
supplies power relative to its baseline, so the state of charge falls.

The ``derive_*`` helpers compute aggregate limits for a homogeneous population
of thermostatically controlled loads. They avoid coercing to float so that
``fractions.Fraction`` inputs stay exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

SECONDS_PER_HOUR = 3600.0

FLEET_COLUMNS = (
    "id",
    "alpha",
    "beta_seconds",
    "capacity_gwh",
    "eta_plus_gw",
    "eta_minus_gw",
    "kappa",
)


@dataclass(frozen=True)
class DerClassParams:
    id: str
    alpha: float
    beta_hours: float
    soc_capacity_gwh: float
    power_max_gw: float
    power_min_gw: float
    kappa: float

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"{self.id}: alpha must lie in [0, 1], got {self.alpha}")
        if not self.beta_hours > 0:
            raise ValueError(f"{self.id}: beta must be positive, got {self.beta_hours}")
        for name in ("soc_capacity_gwh", "power_max_gw", "power_min_gw", "kappa"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"{self.id}: {name} must be nonnegative, got {value}")

    @property
    def beta_seconds(self) -> float:
        return self.beta_hours * SECONDS_PER_HOUR

    def scaled(self, factor: float) -> "DerClassParams":
        """Copy with capacity and both power limits multiplied by ``factor``."""
        return DerClassParams(
            id=self.id,
            alpha=self.alpha,
            beta_hours=self.beta_hours,
            soc_capacity_gwh=self.soc_capacity_gwh * factor,
            power_max_gw=self.power_max_gw * factor,
            power_min_gw=self.power_min_gw * factor,
            kappa=self.kappa,
        )


@dataclass(frozen=True)
class TclParams:
    """Homogeneous population of heating TCLs.

    ``gamma`` is thermal capacitance over COP expressed so that
    ``(theta - theta_s) / gamma`` is in GWh per device, and ``p_on_gw`` is the
    per-device on-power in GW. ``t_on``/``t_off`` are stationary durations in
    steps and are inputs, not derived from the thermal constants.
    """

    n_devices: float
    lambda_: float
    gamma: float
    theta_plus: float
    theta_minus: float
    theta_ambient: float
    p_on_gw: float
    t_on: float
    t_off: float

    def __post_init__(self):
        if not self.n_devices >= 1:
            raise ValueError(f"n_devices must be >= 1, got {self.n_devices}")
        if not 0 <= self.lambda_ <= 1:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.theta_plus < self.theta_minus:
            raise ValueError(
                f"theta_plus ({self.theta_plus}) is below theta_minus ({self.theta_minus})"
            )
        if self.t_on < 0 or self.t_off < 0 or self.t_on + self.t_off <= 0:
            raise ValueError("t_on and t_off must be nonnegative with a positive sum")
        if self.p_on_gw < 0:
            raise ValueError(f"p_on_gw must be nonnegative, got {self.p_on_gw}")

    @property
    def theta_setpoint(self):
        # midpoint of the deadband; see derive_soc_capacity
        return (self.theta_plus + self.theta_minus) / 2


@dataclass(frozen=True)
class FleetState:
    soc_gwh: tuple[float, ...]
    time_index: int = 0

    @classmethod
    def zeros(cls, size: int, time_index: int = 0) -> "FleetState":
        return cls(tuple(0.0 for _ in range(size)), time_index)

    @classmethod
    def from_array(cls, soc, time_index: int = 0) -> "FleetState":
        return cls(tuple(float(v) for v in np.asarray(soc, dtype=float)), time_index)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.soc_gwh, dtype=float)

    def __len__(self) -> int:
        return len(self.soc_gwh)


def step_soc(params: DerClassParams, x, p):
    """One step of the leaky SoC recursion. No clamping is applied."""
    return params.alpha * x - params.beta_hours * p


def check_state(params: DerClassParams, x, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(abs(x) <= params.soc_capacity_gwh + tol)


def check_power(params: DerClassParams, p, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(-params.power_min_gw - tol <= p <= params.power_max_gw + tol)


def check_fleet_state(fleet: Sequence[DerClassParams], state: FleetState, tol: float = 0.0) -> bool:
    if len(state) != len(fleet):
        raise ValueError(f"state has {len(state)} entries for a fleet of {len(fleet)}")
    return all(check_state(par, x, tol) for par, x in zip(fleet, state.soc_gwh))


def derive_average_power(tcl: TclParams):
    """Per-device baseline power, the on-power weighted by the duty cycle."""
    return tcl.p_on_gw * tcl.t_on / (tcl.t_on + tcl.t_off)


def derive_power_limits(tcl: TclParams):
    """Return ``(eta_plus, eta_minus)`` for the whole population.

    Switching every device off supplies ``N * P0``; switching every device on
    consumes ``N * (Pm - P0)`` above baseline.
    """
    p0 = derive_average_power(tcl)
    return tcl.n_devices * p0, tcl.n_devices * (tcl.p_on_gw - p0)


def derive_soc_capacity(tcl: TclParams):
    """SoC bound reached when every device sits at a deadband edge.

    Uses the deadband midpoint as set-point, giving ``N (theta+ - theta-) / (2 gamma)``.
    """
    if not tcl.gamma > 0:
        raise ValueError(f"gamma must be positive, got {tcl.gamma}")
    return tcl.n_devices * (tcl.theta_plus - tcl.theta_setpoint) / tcl.gamma


def derive_class(tcl: TclParams, id: str, kappa: float = 1.0, beta_seconds: float = 300.0) -> DerClassParams:
    eta_plus, eta_minus = derive_power_limits(tcl)
    return DerClassParams(
        id=id,
        alpha=float(tcl.lambda_),
        beta_hours=beta_seconds / SECONDS_PER_HOUR,
        soc_capacity_gwh=float(derive_soc_capacity(tcl)),
        power_max_gw=float(eta_plus),
        power_min_gw=float(eta_minus),
        kappa=kappa,
    )


# -- fleet files -------------------------------------------------------------

def _parse_fleet(text: str, source: str) -> list[DerClassParams]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines, skipinitialspace=True)
    if reader.fieldnames is None:
        raise ValueError(f"{source}: empty fleet file")
    missing = [c for c in FLEET_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"{source}: missing columns {missing}")
    fleet = []
    for row in reader:
        try:
            fleet.append(
                DerClassParams(
                    id=row["id"].strip(),
                    alpha=float(row["alpha"]),
                    beta_hours=float(row["beta_seconds"]) / SECONDS_PER_HOUR,
                    soc_capacity_gwh=float(row["capacity_gwh"]),
                    power_max_gw=float(row["eta_plus_gw"]),
                    power_min_gw=float(row["eta_minus_gw"]),
                    kappa=float(row["kappa"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{source}: bad record {dict(row)}: {exc}") from exc
    if not fleet:
        raise ValueError(f"{source}: no DER classes defined")
    ids = [par.id for par in fleet]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{source}: duplicate class ids in {ids}")
    return fleet


def load_fleet(path) -> list[DerClassParams]:
    path = Path(path)
    return _parse_fleet(path.read_text(), str(path))


def write_fleet(fleet: Sequence[DerClassParams], path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FLEET_COLUMNS)
    for par in fleet:
        writer.writerow(
            [par.id, repr(par.alpha), repr(par.beta_seconds), repr(par.soc_capacity_gwh),
             repr(par.power_max_gw), repr(par.power_min_gw), repr(par.kappa)]
        )
    Path(path).write_text(buf.getvalue())


def table1_fleet() -> list[DerClassParams]:
    """The five stock aggregations: ACs, E-WHs, bldgs, RFGs, EVs."""
    text = resources.files("der_mpc").joinpath("data/table1_fleet.csv").read_text()
    return _parse_fleet(text, "table1_fleet.csv")
