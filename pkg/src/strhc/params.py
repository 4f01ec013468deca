"""Parameter bundles for the planner, the vehicle model and the traffic worlds.

Defaults reproduce the general planner settings and the vehicle table used for
the dense-traffic cruise experiments (IDM world, Ts = 0.1 s, N = 50).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class ConfigError(ValueError):
    """Raised when a parameter bundle violates its invariants."""


class VehicleState(NamedTuple):
    px: float
    py: float
    phi: float
    v_lon: float
    v_lat: float
    omega: float


class ControlInput(NamedTuple):
    accel: float
    steer: float


class SvState(NamedTuple):
    ox: float
    oy: float
    ovx: float
    ovy: float


STATE_FIELDS = VehicleState._fields
CONTROL_FIELDS = ControlInput._fields


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1412.0
    Iz: float = 1536.7
    lf: float = 1.06
    lr: float = 1.85
    kf: float = -128916.0
    kr: float = -85944.0
    v_lon_floor: float = 0.5

    def __post_init__(self):
        _require(self.m > 0 and self.Iz > 0, "vehicle: m and Iz must be positive")
        _require(self.lf > 0 and self.lr > 0, "vehicle: lf and lr must be positive")
        _require(self.kf < 0 and self.kr < 0, "vehicle: kf and kr must be negative")
        _require(self.v_lon_floor > 0, "vehicle: v_lon_floor must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.m, self.Iz, self.lf, self.lr, self.kf, self.kr, self.v_lon_floor])


@dataclass(frozen=True)
class Bounds:
    """Box limits on the state and the control.

    ``accel_min`` is the (negative) maximum deceleration; the steering box is
    symmetric about zero.
    """

    px_min: float = -math.inf
    px_max: float = math.inf
    py_min: float = -10.0
    py_max: float = 10.0
    phi_min: float = -0.227
    phi_max: float = 0.227
    v_lon_min: float = 0.0
    v_lon_max: float = 24.0
    v_lat_min: float = -3.0
    v_lat_max: float = 3.0
    omega_min: float = -5.0
    omega_max: float = 5.0
    accel_min: float = -3.0
    accel_max: float = 1.5
    steer_max: float = 0.6

    def __post_init__(self):
        lo, hi = self.state_lower(), self.state_upper()
        _require(bool(np.all(lo <= hi)), "bounds: state min must not exceed max")
        _require(self.accel_min <= self.accel_max, "bounds: accel_min must not exceed accel_max")
        _require(self.steer_max >= 0, "bounds: steer_max must be non-negative")

    def state_lower(self) -> np.ndarray:
        return np.array([self.px_min, self.py_min, self.phi_min,
                         self.v_lon_min, self.v_lat_min, self.omega_min])

    def state_upper(self) -> np.ndarray:
        return np.array([self.px_max, self.py_max, self.phi_max,
                         self.v_lon_max, self.v_lat_max, self.omega_max])

    def control_lower(self) -> np.ndarray:
        return np.array([self.accel_min, -self.steer_max])

    def control_upper(self) -> np.ndarray:
        return np.array([self.accel_max, self.steer_max])

    def state_within(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.state_lower()) and np.all(x <= self.state_upper()))

    def control_within(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.control_lower()) and np.all(u <= self.control_upper()))


@dataclass(frozen=True)
class SafetyParams:
    """Barrier ellipse, enhancement and attention constants.

    ``gamma`` is measured in prediction steps, so the attention weight of step
    k is ``w_i * exp(-k / gamma)``. ``gamma = inf`` freezes the weights, which
    is the fixed-attention ablation.
    """

    a_axis: float = 3.0
    b_axis: float = 2.0
    c: float = 1.0
    lam: float = 1.0
    eta: float = 1e-5
    gamma: float = 50.0
    w: float = 1e5
    M: int = 6
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        _require(self.a_axis > 0 and self.b_axis > 0, "safety: ellipse axes must be positive")
        _require(self.lam > 0 and self.eta > 0 and self.gamma > 0,
                 "safety: lam, eta and gamma must be positive")
        _require(self.c >= 0, "safety: c must be non-negative")
        _require(self.w >= 0, "safety: w must be non-negative")
        _require(int(self.M) >= 1, "safety: M must be at least 1")
        if self.weights is not None:
            _require(len(self.weights) == self.M, "safety: weights must have length M")
            _require(all(wi >= 0 for wi in self.weights), "safety: weights must be non-negative")

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(int(self.M), float(self.w))
        return np.asarray(self.weights, dtype=float)

    def fixed_attention(self) -> SafetyParams:
        return dataclasses.replace(self, gamma=math.inf)


@dataclass(frozen=True)
class CostWeights:
    q_lat: float = 1e3
    q_vel: float = 1e5
    r_accel: float = 5e4
    r_steer: float = 5e6
    qT_phi: float = 1e10
    qT_omega: float = 1e8

    def __post_init__(self):
        for f in dataclasses.fields(self):
            _require(getattr(self, f.name) >= 0, f"costs: {f.name} must be non-negative")

    @classmethod
    def racing(cls, **kw) -> CostWeights:
        kw.setdefault("qT_phi", 1e4)
        kw.setdefault("qT_omega", 1e4)
        return cls(**kw)


@dataclass(frozen=True)
class TaskSpec:
    v_d: float = 15.0
    py_d: float = -2.0
    task_kind: str = "cruise"

    def __post_init__(self):
        _require(self.task_kind in ("cruise", "racing"), "task: task_kind must be cruise or racing")

    def validate(self, bounds: Bounds):
        _require(bounds.v_lon_min <= self.v_d <= bounds.v_lon_max,
                 f"task: v_d={self.v_d} outside velocity bounds "
                 f"[{bounds.v_lon_min}, {bounds.v_lon_max}]")
        _require(bounds.py_min <= self.py_d <= bounds.py_max,
                 f"task: py_d={self.py_d} outside road bounds [{bounds.py_min}, {bounds.py_max}]")


@dataclass(frozen=True)
class OcpConfig:
    N: int = 50
    Ts: float = 0.1
    nu0: int = 15
    nu: int = 5
    step_tol: float = 1e-6
    cost_tol: float = 1e-8
    rho_state: float = 1e6
    substeps: int = 1

    def __post_init__(self):
        _require(int(self.N) >= 1, "ocp: N must be at least 1")
        _require(self.Ts > 0, "ocp: Ts must be positive")
        _require(self.nu0 >= self.nu >= 1, "ocp: need nu0 >= nu >= 1")
        _require(self.step_tol > 0 and self.cost_tol > 0, "ocp: tolerances must be positive")
        _require(self.rho_state >= 0, "ocp: rho_state must be non-negative")
        _require(int(self.substeps) >= 1, "ocp: substeps must be at least 1")

    @property
    def horizon(self) -> float:
        return self.N * self.Ts


@dataclass(frozen=True)
class PlannerConfig:
    """Every bundle the receding-horizon planner needs."""

    vehicle: VehicleParams = field(default_factory=VehicleParams)
    bounds: Bounds = field(default_factory=Bounds)
    safety: SafetyParams = field(default_factory=SafetyParams)
    weights: CostWeights = field(default_factory=CostWeights)
    task: TaskSpec = field(default_factory=TaskSpec)
    ocp: OcpConfig = field(default_factory=OcpConfig)

    def __post_init__(self):
        self.task.validate(self.bounds)

    def replace(self, **kw) -> PlannerConfig:
        return dataclasses.replace(self, **kw)
