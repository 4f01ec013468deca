"""Episode builders tying configuration bundles to environments and metrics."""
from __future__ import annotations

import dataclasses
from functools import partial

from .controller import EscapeConfig, SimEnvironment, SimulationLog, run_closed_loop
from .metrics import MetricsReport, compute_metrics, horizon_sweep
from .params import PlannerConfig, TaskSpec
from .sim import ScenarioConfig


def with_task(cfg: PlannerConfig, scenario: ScenarioConfig, v_d: float | None = None,
              T: float | None = None, N: int | None = None):
    """Copy of ``(cfg, scenario)`` with a new target speed and/or horizon.

    The EV starts at the target speed, and the scenario's task mirrors the
    planner's.
    """
    task = cfg.task if v_d is None else dataclasses.replace(cfg.task, v_d=float(v_d))
    ocp = cfg.ocp
    if N is not None:
        ocp = dataclasses.replace(ocp, N=int(N))
    if T is not None and N is not None:
        ocp = dataclasses.replace(ocp, Ts=float(T) / int(N))
    cfg = cfg.replace(task=task, ocp=ocp)
    ev = scenario.ev_init._replace(v_lon=task.v_d) if v_d is not None else scenario.ev_init
    scenario = dataclasses.replace(scenario, task=task, ev_init=ev)
    return cfg, scenario


def run_sim_episode(cfg: PlannerConfig, scenario: ScenarioConfig, ablation: bool = False,
                    escape: EscapeConfig | None = EscapeConfig(),
                    duration: float | None = None, meta: dict | None = None
                    ) -> tuple[SimulationLog, MetricsReport]:
    """One IDM episode; ``ablation`` freezes the attention weights."""
    if ablation:
        cfg = cfg.replace(safety=cfg.safety.fixed_attention())
    scenario = dataclasses.replace(scenario, vehicle=cfg.vehicle, substeps=cfg.ocp.substeps,
                                   task=cfg.task)
    env = SimEnvironment(scenario, dt=cfg.ocp.Ts)
    log = run_closed_loop(env, cfg, duration or scenario.duration, escape=escape,
                          meta={"ablation": "fixed-attention" if ablation else None,
                                "seed": scenario.rng_seed, "mode": "sim", **(meta or {})})
    return log, compute_metrics(log, cfg.task, cfg.safety)


def _sweep_cell(cfg, scenario, ablation, escape, T, N, v_d):
    c, s = with_task(cfg, scenario, v_d=v_d, T=T, N=N)
    return run_sim_episode(c, s, ablation=ablation, escape=escape)


def sim_horizon_sweep(cfg: PlannerConfig, scenario: ScenarioConfig, horizons, vd_values,
                      ablation: bool = False, escape: EscapeConfig | None = EscapeConfig(),
                      workers: int = 1) -> list[dict]:
    """Horizon/target-speed sweep on the IDM world with a fixed seed.

    ``horizons`` holds ``(T, N)`` pairs; all pairs must share one step length.
    """
    steps = {round(T / N, 12) for T, N in horizons}
    if len(steps) > 1:
        raise ValueError(f"inconsistent Ts across horizons: {sorted(steps)}")
    cell = partial(_sweep_cell, cfg, scenario, ablation, escape)
    return horizon_sweep(cell, horizons, vd_values, scenario.rng_seed, workers)


def replay_config(cfg: PlannerConfig, Ts: float = 0.08, N: int = 70) -> PlannerConfig:
    """Planner bundle with the replay control period and horizon."""
    return cfg.replace(ocp=dataclasses.replace(cfg.ocp, Ts=Ts, N=N))


def run_replay_episode(cfg: PlannerConfig, ds, ev_init, duration: float | None = None,
                       ablation: bool = False, escape: EscapeConfig | None = EscapeConfig(),
                       t_start: float | None = None, meta: dict | None = None
                       ) -> tuple[SimulationLog, MetricsReport]:
    """Drive the EV through recorded traffic; ``cfg.ocp.Ts`` sets the control period."""
    from .replay import ReplayEnvironment

    if ablation:
        cfg = cfg.replace(safety=cfg.safety.fixed_attention())
    env = ReplayEnvironment(ds, ev_init, cfg.vehicle, dt=cfg.ocp.Ts, substeps=cfg.ocp.substeps,
                            t_start=t_start)
    t0, t1 = ds.span
    duration = duration or (t1 - env.time)
    log = run_closed_loop(env, cfg, duration, escape=escape,
                          meta={"ablation": "fixed-attention" if ablation else None, "mode": "replay",
                                **(meta or {})})
    return log, compute_metrics(log, cfg.task, cfg.safety)
