"""Spatiotemporal receding-horizon planning for dense multi-lane traffic.

The planner solves a multiple-shooting optimal control problem for a dynamic
bicycle model with a Gauss-Newton SQP, penalizing proximity to surrounding
vehicles through a barrier-based safety cost whose weight decays along the
horizon. Closed-loop evaluation runs against IDM traffic or recorded
trajectories.
"""
from .controller import EscapeConfig, Observation, SimEnvironment, SimulationLog, StepRecord, rhc_step, run_closed_loop
from .metrics import MetricsReport, compute_metrics, horizon_sweep
from .params import (Bounds, ConfigError, ControlInput, CostWeights, OcpConfig, PlannerConfig, SafetyParams,
                     SvState, TaskSpec, VehicleParams, VehicleState)
from .prediction import SvPrediction, nearest_M, predict_constant_velocity
from .solver import OcpProblem, SolveResult, sqp_solve

__all__ = [
    "Bounds", "ConfigError", "ControlInput", "CostWeights", "EscapeConfig", "MetricsReport", "Observation",
    "OcpConfig", "OcpProblem", "PlannerConfig", "SafetyParams", "SimEnvironment", "SimulationLog",
    "SolveResult", "StepRecord", "SvPrediction", "SvState", "TaskSpec", "VehicleParams", "VehicleState",
    "compute_metrics", "horizon_sweep", "nearest_M", "predict_constant_velocity", "rhc_step",
    "run_closed_loop", "sqp_solve",
]
