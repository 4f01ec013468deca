"""Command-line entry point: ``run``, ``sweep`` and ``validate``.

Exit codes: 0 completed, 1 configuration or input error, 2 collision,
3 solver failure. A sweep exits with the code of its worst cell.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from functools import partial
from pathlib import Path

from .config import RunConfig, load_config, render_config
from .controller import _jsonable
from .metrics import horizon_sweep, reports_csv
from .params import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION, EXIT_SOLVER = 0, 1, 2, 3
_STATUS_EXIT = {"completed": EXIT_OK, "collided": EXIT_COLLISION, "solver-failed": EXIT_SOLVER}
_SEVERITY = [EXIT_OK, EXIT_COLLISION, EXIT_SOLVER, EXIT_CONFIG]
WORKERS_ENV = "STRHC_WORKERS"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def embedded_config(cfg: RunConfig) -> dict:
    """Resolved config as stored inside artifacts (the output directory is left out)."""
    d = cfg.to_dict()
    d.pop("out", None)
    return d


def run_episode(cfg: RunConfig):
    """Run the episode described by ``cfg``; returns ``(log, report)``."""
    from .runner import run_replay_episode, run_sim_episode

    ablation = cfg.ablation == "fixed-attention"
    meta = {"config": embedded_config(cfg)}
    if cfg.mode == "replay":
        from .replay import load_trajectories
        ds = load_trajectories(cfg.dataset)
        return run_replay_episode(cfg.planner, ds, cfg.ev_start, duration=cfg.duration,
                                  ablation=ablation, escape=cfg.escape, t_start=cfg.t_start, meta=meta)
    scenario = dataclasses.replace(cfg.scenario, ev_init=cfg.ev_start)
    return run_sim_episode(cfg.planner, scenario, ablation=ablation, escape=cfg.escape,
                           duration=cfg.duration, meta=meta)


def write_artifacts(out: Path, cfg: RunConfig, log, report) -> None:
    header = {"config": embedded_config(cfg)}
    _atomic_write(out / "log.json", log.to_json())
    _atomic_write(out / "steps.csv", log.steps_csv(header=header))
    metrics = {"metrics": _jsonable(report.to_dict()), "status": log.status,
               "status_time": log.status_time, **header}
    _atomic_write(out / "metrics.json", json.dumps(_jsonable(metrics), indent=1, sort_keys=True))
    _atomic_write(out / "config.ini", render_config(cfg))


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_out(args.out)
    if args.ablation is not None:
        cfg = cfg.with_ablation(None if args.ablation == "none" else args.ablation)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    log, report = run_episode(cfg)
    out = Path(cfg.out)
    write_artifacts(out, cfg, log, report)
    print(f"{log.status}" + (f" at t={log.status_time:.2f}s" if log.status_time is not None else ""))
    print(f"s_min={report.s_min:.4g} e_mae={report.e_mae:.4g} pct_in_lane={report.pct_in_lane:.3f} "
          f"t_solve_avg={report.t_solve_avg:.1f}ms -> {out}")
    return _STATUS_EXIT[log.status]


def _sweep_cell(cfg: RunConfig, T: float, N: int, v_d: float):
    planner = cfg.planner
    task = dataclasses.replace(planner.task, v_d=float(v_d))
    ocp = dataclasses.replace(planner.ocp, N=int(N), Ts=float(T) / int(N))
    ev = cfg.ev_start._replace(v_lon=float(v_d))
    cell = dataclasses.replace(cfg, planner=planner.replace(task=task, ocp=ocp), ev_init=ev,
                               scenario=dataclasses.replace(cfg.scenario, task=task))
    return run_episode(cell)


def _parse_list(text: str, name: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"--{name}: empty list")
    return vals


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    Ts = cfg.planner.ocp.Ts
    horizons = []
    for T in _parse_list(args.T, "T"):
        N = int(round(T / Ts))
        if N < 1 or abs(N * Ts - T) > 1e-9:
            raise ConfigError(f"--T {T}: not a whole number of {Ts}s intervals")
        horizons.append((T, N))
    vds = _parse_list(args.vd, "vd")
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    rows = horizon_sweep(partial(_sweep_cell, cfg), horizons, vds, cfg.seed, workers=max(1, workers))
    out = Path(cfg.out)
    header = f"# config: {json.dumps(embedded_config(cfg), sort_keys=True)}\n"
    _atomic_write(out / "sweep.csv", header + reports_csv(rows, extra=("v_d", "T", "N", "seed", "status")))
    worst = EXIT_OK
    for row in rows:
        code = _STATUS_EXIT.get(row["status"], EXIT_SOLVER)
        rep = row["report"]
        avoid = "nan" if rep is None else f"{rep.dist_first_avoid:.3f}"
        print(f"v_d={row['v_d']:g} T={row['T']:g} N={row['N']}: {row['status']} dist_first_avoid={avoid}")
        if _SEVERITY.index(code) > _SEVERITY.index(worst):
            worst = code
    print(f"{len(rows)} cells -> {out / 'sweep.csv'}")
    return worst


def cmd_validate(args) -> int:
    from .replay import DatasetError, load_trajectories
    try:
        ds = load_trajectories(args.dataset)
    except (DatasetError, OSError) as exc:
        print(f"invalid dataset: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = ds.summary()
    print(f"vehicles: {s['vehicles']}")
    print(f"samples: {s['samples']}")
    print(f"span: {s['span'][0]:g} .. {s['span'][1]:g} s")
    print(f"timestep: {s['timestep']:g} s (min {s['timestep_min']:g}, max {s['timestep_max']:g})")
    if ds.velocities_derived:
        print("velocities derived from positions (no vx/vy columns)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strhc", description="Spatiotemporal receding-horizon planner runs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="sectioned key = value config file")
        sp.add_argument("--seed", type=int, help="scenario seed (overrides run.seed)")
        sp.add_argument("--out", help="output directory (overrides run.out)")
        sp.add_argument("--ablation", choices=["fixed-attention", "none"],
                        help="freeze the attention weights (baseline without temporal decay)")

    r = sub.add_parser("run", help="run one closed-loop episode")
    common(r)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="horizon / target-speed sweep on one seed")
    common(s)
    s.add_argument("--T", default="2,5,8", help="horizon lengths in seconds, comma separated")
    s.add_argument("--vd", default="10,12,15", help="target speeds in m/s, comma separated")
    s.set_defaults(func=cmd_sweep)
    v = sub.add_parser("validate", help="check a trajectory CSV")
    v.add_argument("dataset")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
