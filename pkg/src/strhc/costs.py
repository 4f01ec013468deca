"""Task cost terms: lane/speed goal, terminal heading stability, control effort."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .params import CostWeights, PlannerConfig, TaskSpec
from .safety import safety_cost

log = logging.getLogger(__name__)


def goal_cost(x, task: TaskSpec, w: CostWeights) -> float:
    x = np.asarray(x, dtype=float)
    return float(w.q_lat * (x[1] - task.py_d) ** 2 + w.q_vel * (x[3] - task.v_d) ** 2)


def terminal_cost(xN, w: CostWeights) -> float:
    xN = np.asarray(xN, dtype=float)
    return float(w.qT_phi * xN[2] ** 2 + w.qT_omega * xN[5] ** 2)


def control_cost(u, w: CostWeights) -> float:
    u = np.asarray(u, dtype=float)
    return float(w.r_accel * u[0] ** 2 + w.r_steer * u[1] ** 2)


def running_cost(x, u, svs, k: int, cfg: PlannerConfig) -> float:
    return (goal_cost(x, cfg.task, cfg.weights)
            + safety_cost(x, svs, k, cfg.safety)
            + control_cost(u, cfg.weights))


@dataclass(frozen=True)
class TerminalDominance:
    dominant: bool
    terminal: float
    running: float

    def __str__(self):
        rel = ">" if self.dominant else "<="
        return f"terminal cost {self.terminal:.6g} {rel} running cost {self.running:.6g}"


def check_terminal_dominance(breakdown) -> TerminalDominance:
    """Check whether the terminal cost exceeds the summed running cost.

    ``breakdown`` is a mapping with ``goal``, ``safety``, ``control`` and
    ``terminal`` totals. A failed check is logged as a warning only.
    """
    running = float(breakdown["goal"] + breakdown["safety"] + breakdown["control"])
    terminal = float(breakdown["terminal"])
    report = TerminalDominance(terminal > running, terminal, running)
    if not report.dominant:
        log.warning("terminal cost does not dominate: %s", report)
    return report
