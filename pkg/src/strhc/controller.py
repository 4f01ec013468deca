"""Receding-horizon loop: measure, select, predict, solve, actuate, warm start."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import dynamics
from .params import PlannerConfig, SafetyParams, SvState, VehicleState
from .prediction import SvPrediction, nearest_M, predict_constant_velocity
from .safety import barrier_h
from .sim import CollisionReport, ScenarioConfig, WorldState, check_collision, spawn_scenario, step_world
from .solver import InvalidWarmStart, OcpProblem, SolveResult, sqp_solve, warm_start_shift, zero_guess

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    time: float
    ev: VehicleState
    svs: tuple[tuple[Hashable, SvState], ...]


@dataclass(frozen=True)
class EscapeConfig:
    """Alternative initial guesses tried when the plan runs close to a vehicle.

    Gauss-Newton only feels the barrier once the plan is inside the margin, and
    sees no lateral gradient when the ego and the blocking vehicle share a
    centerline. When the plan's smallest barrier value drops below
    ``c + buffer``, the solve is repeated from a left lane-shift, a right
    lane-shift and a braking guess, and the cheapest result is kept.
    """

    enabled: bool = True
    buffer: float = 2.0
    offset: float = 4.0
    pulse_time: float = 2.5
    max_steer: float = 0.15


class Environment(Protocol):
    dt: float
    mode: str

    def observe(self) -> Observation: ...

    def step(self, u) -> None: ...

    def finished(self) -> bool: ...

    def collision(self, sp: SafetyParams) -> CollisionReport: ...

    def describe(self) -> dict: ...


class SimEnvironment:
    """IDM world wrapper holding the current immutable :class:`WorldState`."""

    mode = "sim"

    def __init__(self, scenario: ScenarioConfig, dt: float = 0.1):
        self.scenario = scenario
        self.dt = dt
        self.world = spawn_scenario(scenario)

    def observe(self) -> Observation:
        return Observation(self.world.time, self.world.ev, tuple(self.world.sv_list()))

    def step(self, u) -> None:
        self.world = step_world(self.world, u, self.dt, self.scenario)

    def finished(self) -> bool:
        return False

    def collision(self, sp: SafetyParams) -> CollisionReport:
        return check_collision(self.world, sp)

    def describe(self) -> dict:
        return {"mode": self.mode, "seed": self.scenario.rng_seed, "dt": self.dt,
                "scenario": _jsonable(dataclasses.asdict(self.scenario))}


@dataclass(frozen=True)
class StepRecord:
    time: float
    ev: tuple
    applied: tuple
    min_h: float
    costs: dict
    iterations: int
    converged: bool
    solve_time: float
    selected: tuple
    guess_kind: str
    solver_failed: bool = False
    leader_gap: float | None = None
    leader_speed: float | None = None
    defect: float = 0.0


@dataclass
class SimulationLog:
    meta: dict
    records: list = field(default_factory=list)
    status: str = "completed"
    status_time: float | None = None

    @property
    def collided(self) -> bool:
        return self.status == "collided"

    def to_dict(self) -> dict:
        return {"meta": self.meta, "status": self.status, "status_time": self.status_time,
                "records": [_record_dict(r) for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True)

    def steps_csv(self, timing: bool = True, header: dict | None = None) -> str:
        """Per-step table; ``header`` entries become leading ``# key: json`` lines."""
        buf = io.StringIO()
        for key, value in (header or {}).items():
            buf.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = CSV_COLUMNS if timing else [c for c in CSV_COLUMNS if c not in TIMING_COLUMNS]
        writer.writerow(cols)
        for r in self.records:
            row = _record_row(r)
            writer.writerow([row[c] for c in cols])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> SimulationLog:
        recs = []
        for r in d["records"]:
            r = dict(r)
            r["ev"] = tuple(r["ev"])
            r["applied"] = tuple(r["applied"])
            r["selected"] = tuple(r["selected"])
            r["min_h"] = math.inf if r["min_h"] is None else r["min_h"]
            recs.append(StepRecord(**r))
        return cls(d["meta"], recs, d["status"], d.get("status_time"))


COST_KEYS = ("goal", "safety", "control", "terminal", "penalty")
CSV_COLUMNS = (["time", "px", "py", "phi", "v_lon", "v_lat", "omega", "accel", "steer", "min_h"]
               + [f"cost_{k}" for k in COST_KEYS]
               + ["leader_gap", "leader_speed", "iterations", "converged", "guess_kind", "solver_failed",
                  "defect", "solve_time", "selected"])
TIMING_COLUMNS = ("solve_time",)


def _fmt(v: float) -> str:
    return repr(float(v))


def _record_row(r: StepRecord) -> dict:
    row = {"time": _fmt(r.time), "min_h": _fmt(r.min_h), "iterations": r.iterations,
           "converged": int(r.converged), "guess_kind": r.guess_kind,
           "solver_failed": int(r.solver_failed), "defect": _fmt(r.defect), "solve_time": _fmt(r.solve_time),
           "selected": " ".join(str(s) for s in r.selected),
           "leader_gap": "" if r.leader_gap is None else _fmt(r.leader_gap),
           "leader_speed": "" if r.leader_speed is None else _fmt(r.leader_speed)}
    for name, v in zip(("px", "py", "phi", "v_lon", "v_lat", "omega"), r.ev):
        row[name] = _fmt(v)
    row["accel"], row["steer"] = _fmt(r.applied[0]), _fmt(r.applied[1])
    for k in COST_KEYS:
        row[f"cost_{k}"] = _fmt(r.costs.get(k, 0.0))
    return row


def _record_dict(r: StepRecord) -> dict:
    d = dataclasses.asdict(r)
    d["min_h"] = None if not math.isfinite(r.min_h) else r.min_h
    return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else (None if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def config_hash(obj) -> str:
    blob = json.dumps(_jsonable(obj), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def plan_min_barrier(result: SolveResult, problem: OcpProblem) -> float:
    if not problem.predictions:
        return math.inf
    X = result.states
    return float(min(np.min(barrier_h(X[:, :2], pr.positions, problem.safety))
                     for pr in problem.predictions[: problem.safety.M]))


def _pulse(N: int, Ts: float, esc: EscapeConfig) -> np.ndarray:
    K = max(2, min(N, int(round(esc.pulse_time / Ts))))
    s = np.zeros(N)
    s[:K] = np.sin(2.0 * np.pi * np.arange(K) / K)
    return s


def escape_guesses(base: SolveResult, problem: OcpProblem, esc: EscapeConfig) -> dict:
    """Lane-shift (both sides) and braking guesses built around ``base.controls``."""
    ocp, b = problem.ocp, problem.bounds
    N = ocp.N
    p = problem.vehicle.as_array()
    U0 = np.ascontiguousarray(base.controls)
    x0 = np.ascontiguousarray(problem.x0)
    shape = _pulse(N, ocp.Ts, esc)
    probe = 0.01
    Up = U0.copy()
    Up[:, 1] += probe * shape
    y_base = dynamics.rollout(x0, U0, ocp.Ts, ocp.substeps, p)[:, 1]
    y_probe = dynamics.rollout(x0, Up, ocp.Ts, ocp.substeps, p)[:, 1]
    gain = float(np.max(np.abs(y_probe - y_base))) / probe
    amp = min(esc.offset / gain, esc.max_steer) if gain > 1e-9 else esc.max_steer
    out = {}
    for name, sign in (("left", 1.0), ("right", -1.0)):
        U = U0.copy()
        U[:, 1] = np.clip(U[:, 1] + sign * amp * shape, -b.steer_max, b.steer_max)
        out[name] = U
    U = U0.copy()
    K = max(1, N // 2)
    U[:K, 0] = b.accel_min
    U[:K, 1] = 0.0
    out["brake"] = U
    return out


def rhc_step(obs: Observation, prev: SolveResult | None, cfg: PlannerConfig,
             predictor: Callable[..., SvPrediction] = predict_constant_velocity,
             escape: EscapeConfig | None = EscapeConfig()):
    """One control period. Returns ``(applied control, SolveResult, StepRecord)``.

    The first call starts from the zero sequence with ``nu0`` iterations; later
    calls shift the previous solution and run ``nu`` iterations. If the solve
    fails it is retried once from zeros; if that fails too, full braking is
    applied and the record is flagged.
    """
    ocp = cfg.ocp
    ev = np.asarray(obs.ev, dtype=float)
    chosen = nearest_M(ev, obs.svs, cfg.safety.M)
    preds = [predictor(sv, ocp.N, ocp.Ts, sv_id) for sv_id, sv in chosen]
    problem = OcpProblem.build(ev, preds, cfg)

    if prev is None:
        attempts = [("zero", zero_guess(ocp.N), ocp.nu0)]
    else:
        attempts = [("warm", warm_start_shift(prev), ocp.nu), ("zero", zero_guess(ocp.N), ocp.nu0)]
    result, kind, failed = None, "", False
    for kind, guess, iters in attempts:
        try:
            result = sqp_solve(problem, guess, iters)
        except InvalidWarmStart:
            result = None
        if (result is not None and math.isfinite(result.cost)
                and not (result.status == "linearization_failed" and result.iterations == 0)):
            break
        log.warning("solve from %s guess failed at t=%.3f", kind, obs.time)
        result = None

    if result is None:
        failed = True
        U = np.tile([cfg.bounds.accel_min, 0.0], (ocp.N, 1))
        X = dynamics.rollout(np.ascontiguousarray(ev), U, ocp.Ts, ocp.substeps, cfg.vehicle.as_array())
        result = SolveResult(X, U, math.nan, 0, False, math.nan, 0.0, {}, guess=U.copy(),
                             status="solver_failed")
        kind = "fallback"
    elif escape is not None and escape.enabled and preds:
        if plan_min_barrier(result, problem) < cfg.safety.c + escape.buffer:
            spent = result.solve_time
            best = result
            for name, guess in escape_guesses(result, problem, escape).items():
                try:
                    cand = sqp_solve(problem, guess, ocp.nu)
                except InvalidWarmStart:
                    continue
                spent += cand.solve_time
                if cand.status == "linearization_failed" and cand.iterations == 0:
                    continue
                if cand.cost < best.cost:
                    best, kind = cand, name
            best.solve_time = spent
            result = best

    applied = np.clip(result.controls[0], cfg.bounds.control_lower(), cfg.bounds.control_upper())
    record = StepRecord(
        time=float(obs.time), ev=tuple(map(float, ev)), applied=tuple(map(float, applied)),
        min_h=math.inf, costs=dict(result.cost_breakdown), iterations=result.iterations,
        converged=bool(result.converged), solve_time=float(result.solve_time),
        selected=tuple(sv_id for sv_id, _ in chosen), guess_kind=kind, solver_failed=failed,
        defect=result.defect_residual(problem))
    return applied, result, record


def lane_leader(obs: Observation, py_d: float, band: float):
    """Nearest SV ahead of the EV whose lateral position lies within ``band`` of ``py_d``."""
    best = None
    for _, sv in obs.svs:
        gap = sv[0] - obs.ev[0]
        if gap > 0 and abs(sv[1] - py_d) <= band and (best is None or gap < best[0]):
            best = (float(gap), float(sv[2]))
    return best


def run_closed_loop(env: Environment, cfg: PlannerConfig, duration: float,
                    predictor: Callable[..., SvPrediction] = predict_constant_velocity,
                    escape: EscapeConfig | None = EscapeConfig(),
                    meta: dict | None = None, lane_band: float = 2.0) -> SimulationLog:
    """Drive ``env`` with the planner for ``duration`` seconds (or until it ends).

    Each record also stores the nearest vehicle ahead in the target lane
    (within ``lane_band`` of its centerline) for the avoidance metric.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    info = {"planner": _jsonable(dataclasses.asdict(cfg)), "env": env.describe(),
            "duration": duration, "escape": _jsonable(dataclasses.asdict(escape)) if escape else None}
    info.update(meta or {})
    info["config_hash"] = config_hash(info)
    out = SimulationLog(meta=info)
    n_steps = int(round(duration / env.dt))
    prev = None
    for _ in range(n_steps):
        if env.finished():
            break
        obs = env.observe()
        report = env.collision(cfg.safety)
        applied, result, record = rhc_step(obs, prev, cfg, predictor, escape)
        lead = lane_leader(obs, cfg.task.py_d, lane_band)
        record = dataclasses.replace(record, min_h=report.min_h,
                                     leader_gap=lead[0] if lead else None,
                                     leader_speed=lead[1] if lead else None)
        out.records.append(record)
        if record.solver_failed and out.status == "completed":
            out.status, out.status_time = "solver-failed", record.time
        if report.collided:
            out.status, out.status_time = "collided", record.time
            break
        prev = None if record.solver_failed else result
        env.step(applied)
    return out
