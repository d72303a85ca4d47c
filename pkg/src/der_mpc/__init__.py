"""Model predictive allocation of aggregated distributed energy resources."""

from .battery import (
    DerClassParams,
    FleetState,
    TclParams,
    check_power,
    check_state,
    derive_average_power,
    derive_power_limits,
    derive_soc_capacity,
    load_fleet,
    step_soc,
    table1_fleet,
)
from .data import DataError, ForecastProvider, ForecastSeries, load_csv, resample, write_csv
from .harness import Scenario, SimulationResult, compare, run, synthetic_scenario
from .mpc import HorizonPlan, MpcConfig, MpcController, build_qp, mpc_step, plan_horizon
from .qp import QpProblem, QpSolution, QpSolver, SolverSettings, Status, solve, validate_solution

__version__ = "0.1.0"
