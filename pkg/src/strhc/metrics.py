"""Episode statistics: safety, tracking accuracy, ride stability and timing."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .controller import SimulationLog
from .params import SafetyParams, TaskSpec


@dataclass(frozen=True)
class MetricsReport:
    collided: bool
    s_min: float
    e_mae: float
    e_max: float
    lat_mae: float
    pct_in_lane: float
    a_mae: float
    a_max: float
    j_mae: float
    j_max: float
    dist_long: float
    t_solve_avg: float
    dist_first_avoid: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        d = {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
             for k, v in self.to_dict().items()}
        return json.dumps(d, indent=1, sort_keys=True)


FIELDS = [f.name for f in dataclasses.fields(MetricsReport)]


def compute_metrics(log: SimulationLog, task: TaskSpec, sp: SafetyParams | None = None,
                    lane_band: float = 2.0, avoid_threshold: float = 0.5,
                    period: float | None = None) -> MetricsReport:
    """Summarize one closed-loop log.

    ``t_solve_avg`` is in milliseconds. ``dist_first_avoid`` is the gap to the
    slower lane leader at the first step whose lateral deviation exceeds
    ``avoid_threshold``; NaN when the EV never swerves around a slower leader.
    ``sp`` is accepted for interface symmetry; the barrier values are already
    in the log.
    """
    recs = log.records
    if not recs:
        raise ValueError("empty log")
    ev = np.array([r.ev for r in recs])
    u = np.array([r.applied for r in recs])
    t = np.array([r.time for r in recs])
    e = np.abs(ev[:, 3] - task.v_d)
    lat = np.abs(ev[:, 1] - task.py_d)
    acc = np.abs(u[:, 0])
    if len(recs) > 1:
        dt = period if period is not None else float(np.median(np.diff(t)))
        jerk = np.abs(np.diff(u[:, 0])) / dt
    else:
        jerk = np.zeros(1)

    first = math.nan
    for r, dev in zip(recs, lat):
        if dev > avoid_threshold and r.leader_gap is not None and r.leader_speed < r.ev[3]:
            first = float(r.leader_gap)
            break

    return MetricsReport(
        collided=log.collided or any(r.min_h < 0 for r in recs),
        s_min=float(min(r.min_h for r in recs)),
        e_mae=float(e.mean()), e_max=float(e.max()),
        lat_mae=float(lat.mean()), pct_in_lane=float(np.mean(lat <= lane_band)),
        a_mae=float(acc.mean()), a_max=float(acc.max()),
        j_mae=float(jerk.mean()), j_max=float(jerk.max()),
        dist_long=float(ev[-1, 0] - ev[0, 0]),
        t_solve_avg=1e3 * float(np.mean([r.solve_time for r in recs])),
        dist_first_avoid=first,
    )


def reports_csv(rows: Sequence[dict], extra: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(extra) + FIELDS)
    for row in rows:
        rep = row["report"]
        vals = [row.get(k, "") for k in extra]
        vals += ["" if rep is None else getattr(rep, f) for f in FIELDS]
        w.writerow(vals)
    return buf.getvalue()


def horizon_sweep(run_cell: Callable[[float, int, float], tuple], horizons: Sequence[tuple[float, int]],
                  vd_values: Sequence[float], seed: int, workers: int = 1) -> list[dict]:
    """Tabulate one episode per (v_d, horizon) cell.

    ``run_cell(T, N, v_d)`` runs the episode (with ``seed`` baked in) and
    returns ``(SimulationLog, MetricsReport)``. Cells are independent and may
    run in a process pool when ``workers > 1``.
    """
    cells = [(float(T), int(N), float(vd)) for vd in vd_values for T, N in horizons]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_call, [run_cell] * len(cells), cells))
    else:
        outs = [_call(run_cell, c) for c in cells]
    rows = []
    for (T, N, vd), (log, rep, err) in zip(cells, outs):
        rows.append({"v_d": vd, "T": T, "N": N, "seed": seed,
                     "status": err or log.status, "report": rep, "log": log})
    return rows


def _call(fn, cell):
    try:
        log, rep = fn(*cell)
        return log, rep, None
    except Exception as exc:  # a failed cell is reported, not fatal for the sweep
        return None, None, f"error: {exc}"
