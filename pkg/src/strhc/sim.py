"""Synthetic multi-lane traffic driven by the Intelligent Driver Model.

Surrounding vehicles keep to their lane centerlines and follow the nearest
vehicle ahead in their lane, which may be the ego vehicle. Lanes are indexed
from the lowest lateral coordinate upward; with the defaults the six lane
centers sit at -10, -6, -2, 2, 6 and 10 m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import shoot_interval
from .params import ConfigError, SafetyParams, SvState, TaskSpec, VehicleParams, VehicleState
from .safety import barrier_h

B_HARD = 8.0


class VehicleOverlap(RuntimeError):
    """An IDM follower has a non-positive gap to its leader."""


@dataclass(frozen=True)
class IdmParams:
    s0: float = 1.0
    headway: float = 1.0
    a_max: float = 1.5
    b_comf: float = 1.5
    v0: float = 10.0
    delta_exp: float = 4.0

    def __post_init__(self):
        for name in ("s0", "headway", "a_max", "b_comf", "v0", "delta_exp"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"idm: {name} must be positive")


def idm_accel(gap: float, v: float, v_lead: float, p: IdmParams) -> float:
    """IDM acceleration for a follower at speed ``v`` with bumper gap ``gap``.

    The result is clamped to ``[-8, a_max]`` m/s^2.
    """
    if not gap > 0:
        raise VehicleOverlap("vehicle overlap")
    s_star = p.s0 + v * p.headway + v * (v - v_lead) / (2.0 * math.sqrt(p.a_max * p.b_comf))
    a = p.a_max * (1.0 - (v / p.v0) ** p.delta_exp - (s_star / gap) ** 2)
    return min(max(a, -B_HARD), p.a_max)


def idm_equilibrium_gap(v: float, p: IdmParams) -> float:
    """Bumper gap at which a follower matching its leader's speed ``v`` has zero IDM acceleration.

    Infinite at (and above) the desired speed ``v0``.
    """
    ratio = 1.0 - (v / p.v0) ** p.delta_exp
    if ratio <= 0:
        return math.inf
    return (p.s0 + v * p.headway) / math.sqrt(ratio)


@dataclass(frozen=True)
class SvAgent:
    id: int
    lane: int
    x: float
    y: float
    v: float
    v0: float

    @property
    def state(self) -> SvState:
        return SvState(self.x, self.y, self.v, 0.0)


@dataclass(frozen=True)
class ScenarioConfig:
    lane_count: int = 6
    lane_width: float = 4.0
    spawn_range: tuple[float, float] = (-50.0, 130.0)
    sv_count: int = 18
    sv_speed_range: tuple[float, float] = (7.2, 12.0)
    idm: IdmParams = field(default_factory=IdmParams)
    ev_init: VehicleState = VehicleState(0.0, -2.0, 0.0, 15.0, 0.0, 0.0)
    task: TaskSpec = field(default_factory=TaskSpec)
    duration: float = 40.0
    rng_seed: int = 0
    vehicle_length: float = 3.0
    ev_clearance: float = 20.0
    recycle: bool = False
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    substeps: int = 1

    def __post_init__(self):
        if not self.spawn_range[0] < self.spawn_range[1]:
            raise ConfigError("scenario: spawn_range min must be below max")
        if self.sv_count < 0:
            raise ConfigError("scenario: sv_count must be non-negative")
        if not self.duration > 0:
            raise ConfigError("scenario: duration must be positive")
        if self.lane_count < 1 or not self.lane_width > 0:
            raise ConfigError("scenario: need at least one lane of positive width")

    def lane_centers(self) -> np.ndarray:
        return (np.arange(self.lane_count) - (self.lane_count - 1) / 2.0) * self.lane_width

    @property
    def min_gap(self) -> float:
        return self.idm.s0 + self.vehicle_length


@dataclass(frozen=True)
class WorldState:
    time: float
    ev: VehicleState
    svs: tuple[SvAgent, ...]

    def sv_list(self) -> list[tuple[int, SvState]]:
        return [(a.id, a.state) for a in self.svs]


def _ev_lanes(py: float, cfg: ScenarioConfig) -> list[int]:
    # the EV counts as occupant of every lane it overlaps by more than a quarter width
    reach = 0.75 * cfg.lane_width
    return [j for j, c in enumerate(cfg.lane_centers()) if abs(py - c) < reach]


def spawn_scenario(cfg: ScenarioConfig) -> WorldState:
    """Place ``sv_count`` IDM vehicles in random lanes of the spawn window.

    Same-lane vehicles are at least ``s0 + vehicle_length`` apart, and no SV
    starts within ``ev_clearance`` of the EV in a lane the EV occupies. Each
    vehicle starts at its own desired speed.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    centers = cfg.lane_centers()
    ev = VehicleState(*map(float, cfg.ev_init))
    ev_lanes = _ev_lanes(ev.py, cfg)
    lo, hi = cfg.spawn_range
    occupied: dict[int, list[float]] = {j: [] for j in range(cfg.lane_count)}
    agents = []
    for i in range(cfg.sv_count):
        for _ in range(1000):
            lane = int(rng.integers(cfg.lane_count))
            x = ev.px + float(rng.uniform(lo, hi))
            if lane in ev_lanes and abs(x - ev.px) < cfg.ev_clearance:
                continue
            if all(abs(x - o) >= cfg.min_gap for o in occupied[lane]):
                break
        else:
            raise ConfigError(f"scenario: cannot place SV {i} with the required gaps")
        occupied[lane].append(x)
        v0 = float(rng.uniform(*cfg.sv_speed_range))
        agents.append(SvAgent(i, lane, x, float(centers[lane]), v0, v0))
    return WorldState(0.0, ev, tuple(agents))


def _leaders(w: WorldState, cfg: ScenarioConfig):
    """Map agent id -> (leader x, leader speed) for the nearest vehicle ahead in lane."""
    ev_lanes = set(_ev_lanes(w.ev.py, cfg))
    ev_speed = w.ev.v_lon * math.cos(w.ev.phi) - w.ev.v_lat * math.sin(w.ev.phi)
    out = {}
    for lane in range(cfg.lane_count):
        members = [(a.x, a.v, a.id) for a in w.svs if a.lane == lane]
        if lane in ev_lanes:
            members.append((w.ev.px, ev_speed, None))
        members.sort(key=lambda m: (m[0], m[2] is None))
        for k, (x, v, aid) in enumerate(members):
            if aid is None:
                continue
            out[aid] = (members[k + 1][0], members[k + 1][1], members[k + 1][2] is None) \
                if k + 1 < len(members) else None
    return out


def step_world(w: WorldState, ev_u, dt: float, cfg: ScenarioConfig) -> WorldState:
    """Advance the world by ``dt``: the EV through the shooting integrator, SVs by IDM.

    SVs use semi-implicit Euler. With ``cfg.recycle`` an SV that falls behind
    the spawn window reappears at its front edge in the same lane, keeping the
    window populated.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    leaders = _leaders(w, cfg)
    moved = []
    for a in w.svs:
        p = replace(cfg.idm, v0=a.v0)
        lead = leaders[a.id]
        if lead is None:
            acc = idm_accel(math.inf, a.v, a.v, p)
        else:
            gap = lead[0] - a.x - cfg.vehicle_length
            if lead[2]:
                # the EV may cut in closer than a car length; treat as a minimal gap
                gap = max(gap, 0.1)
            acc = idm_accel(gap, a.v, lead[1], p)
        v = max(a.v + dt * acc, 0.0)
        moved.append(replace(a, v=v, x=a.x + dt * v))
    ev = shoot_interval(w.ev, ev_u, dt, cfg.substeps, cfg.vehicle)
    if cfg.recycle:
        moved = _recycle(moved, ev, cfg)
    return WorldState(w.time + dt, ev, tuple(moved))


def _recycle(agents, ev, cfg):
    lo, hi = cfg.spawn_range
    out = list(agents)
    for idx, a in enumerate(out):
        if a.x - ev.px >= lo:
            continue
        front = max((b.x for b in out if b.lane == a.lane and b.id != a.id), default=-math.inf)
        x = max(ev.px + hi, front + cfg.min_gap + a.v0 * cfg.idm.headway)
        out[idx] = replace(a, x=x, v=a.v0)
    return out


@dataclass(frozen=True)
class CollisionReport:
    collided: bool
    margin_violated: bool
    min_h: float


def check_collision(w: WorldState, sp: SafetyParams) -> CollisionReport:
    """Barrier check against every SV in the world (not only the nearest ``M``)."""
    if not w.svs:
        return CollisionReport(False, False, math.inf)
    pos = np.array([[a.x, a.y] for a in w.svs])
    min_h = float(np.min(barrier_h(np.array([w.ev.px, w.ev.py]), pos, sp)))
    return CollisionReport(min_h < 0, 0 <= min_h < sp.c, min_h)
