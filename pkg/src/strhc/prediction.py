"""Surrounding-vehicle prediction and nearest-M selection."""
from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .params import SvState


@dataclass(frozen=True)
class SvPrediction:
    sv_id: Hashable
    states: np.ndarray  # (N+1, 4): ox, oy, ovx, ovy at the shooting nodes

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[1] != 4:
            raise ValueError("prediction states must have shape (N+1, 4)")

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    def at(self, k: int) -> SvState:
        return SvState(*map(float, self.states[k]))


class Predictor(Protocol):
    def __call__(self, sv: SvState, N: int, Ts: float, sv_id: Hashable = None) -> SvPrediction: ...


def predict_constant_velocity(sv, N: int, Ts: float, sv_id: Hashable = None) -> SvPrediction:
    if N < 1 or not Ts > 0:
        raise ValueError("need N >= 1 and Ts > 0")
    s = np.asarray(sv, dtype=float)
    t = Ts * np.arange(N + 1)
    states = np.empty((N + 1, 4))
    states[:, 0] = s[0] + t * s[2]
    states[:, 1] = s[1] + t * s[3]
    states[:, 2] = s[2]
    states[:, 3] = s[3]
    return SvPrediction(sv_id, states)


def nearest_M(ev, all_svs: Sequence[tuple[Hashable, SvState]], M: int) -> list[tuple[Hashable, SvState]]:
    """The ``M`` SVs closest to the ego position, nearest first; ties go to the smaller id."""
    ev = np.asarray(ev, dtype=float)
    keyed = []
    for sv_id, sv in all_svs:
        d = float(np.hypot(sv[0] - ev[0], sv[1] - ev[1]))
        keyed.append((d, sv_id, sv))
    keyed.sort(key=lambda e: (e[0], e[1]))
    return [(sv_id, sv) for _, sv_id, sv in keyed[:M]]
