"""Recorded-trajectory replay: CSV ingestion, interpolation and a non-reactive environment.

Datasets use a normalized CSV layout (UTF-8, comma separated, ``#`` comment
lines ignored) with a required header::

    vehicle_id,t,x,y[,vx,vy]

One row per vehicle per sample. Rows of different vehicles may interleave, but
each vehicle's rows must appear in strictly increasing time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics
from .controller import Observation
from .params import SafetyParams, SvState, VehicleParams, VehicleState
from .safety import barrier_h
from .sim import CollisionReport

REQUIRED = ("vehicle_id", "t", "x", "y")
VELOCITY = ("vx", "vy")


class DatasetError(ValueError):
    """Base class for trajectory-file problems."""


class SchemaError(DatasetError):
    pass


class DataError(DatasetError):
    pass


@dataclass(frozen=True)
class Track:
    """Time-sorted samples of one vehicle; columns are ``t, x, y, vx, vy``."""

    vehicle_id: int
    samples: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.samples[0, 0]), float(self.samples[-1, 0])


@dataclass(frozen=True)
class TrajectoryDataset:
    tracks: dict[int, Track]
    timestep: float
    velocities_derived: bool = False
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.tracks:
            raise DataError("dataset has no vehicles")
        if not (self.timestep > 0 and math.isfinite(self.timestep)):
            raise DataError(f"timestep must be positive, got {self.timestep}")
        for vid, tr in self.tracks.items():
            if not np.all(np.isfinite(tr.samples)):
                raise DataError(f"vehicle {vid}: non-finite values")
            if np.any(np.diff(tr.t) <= 0):
                raise DataError(f"vehicle {vid}: times not strictly increasing")

    @property
    def span(self) -> tuple[float, float]:
        return (min(tr.span[0] for tr in self.tracks.values()),
                max(tr.span[1] for tr in self.tracks.values()))

    @property
    def vehicle_ids(self) -> list[int]:
        return sorted(self.tracks)

    def summary(self) -> dict:
        steps = np.concatenate([np.diff(tr.t) for tr in self.tracks.values()] or [np.zeros(0)])
        t0, t1 = self.span
        return {
            "vehicles": len(self.tracks),
            "samples": int(sum(len(tr.samples) for tr in self.tracks.values())),
            "span": [t0, t1],
            "timestep": self.timestep,
            "timestep_min": float(steps.min()) if steps.size else math.nan,
            "timestep_max": float(steps.max()) if steps.size else math.nan,
            "velocities_derived": self.velocities_derived,
        }


def _float(text: str, col: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"row {line}: column {col!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {line}: column {col!r} is not finite: {text!r}")
    return v


def _derive_velocity(t: np.ndarray, pos: np.ndarray) -> np.ndarray:
    # central differences inside, one-sided at the ends
    if len(t) < 2:
        return np.zeros_like(pos)
    return np.gradient(pos, t, edge_order=1)


def load_trajectories(path) -> TrajectoryDataset:
    """Parse a trajectory CSV (see module docstring for the layout).

    Without ``vx``/``vy`` columns, velocities come from finite differences of
    the positions. Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        numbered = [(i, line) for i, line in enumerate(fh, start=1)
                    if line.strip() and not line.lstrip().startswith("#")]
    if not numbered:
        raise DataError(f"{path}: empty file")
    rows = list(csv.reader(line for _, line in numbered))
    header = [h.strip() for h in rows[0]]
    for col in REQUIRED:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")
    has_v = [c in header for c in VELOCITY]
    if any(has_v) and not all(has_v):
        missing = VELOCITY[has_v.index(False)]
        raise SchemaError(f"{path}: missing column {missing!r} (vx and vy come together)")
    explicit = all(has_v)
    cols = list(REQUIRED) + (list(VELOCITY) if explicit else [])
    idx = {c: header.index(c) for c in cols}
    if len(rows) == 1:
        raise DataError(f"{path}: no data rows")

    per_vehicle: dict[int, list] = {}
    last_line: dict[int, int] = {}
    for (line, _), row in zip(numbered[1:], rows[1:]):
        if len(row) != len(header):
            raise DataError(f"row {line}: expected {len(header)} fields, got {len(row)}")
        raw_id = row[idx["vehicle_id"]].strip()
        try:
            vid = int(raw_id)
        except ValueError:
            raise DataError(f"row {line}: vehicle_id is not an integer: {raw_id!r}") from None
        vals = [_float(row[idx[c]], c, line) for c in cols[1:]]
        seq = per_vehicle.setdefault(vid, [])
        if seq and vals[0] <= seq[-1][0]:
            raise DataError(f"vehicle {vid}: time not increasing at row {line} "
                            f"(t={vals[0]} after t={seq[-1][0]} at row {last_line[vid]})")
        seq.append(vals)
        last_line[vid] = line

    tracks = {}
    for vid, seq in per_vehicle.items():
        a = np.array(seq, dtype=float)
        if not explicit:
            vel = np.column_stack([_derive_velocity(a[:, 0], a[:, 1]),
                                   _derive_velocity(a[:, 0], a[:, 2])])
            a = np.hstack([a, vel])
        tracks[vid] = Track(vid, a)
    steps = np.concatenate([np.diff(tr.t) for tr in tracks.values()])
    if steps.size == 0:
        raise DataError(f"{path}: every vehicle has a single sample; timestep undefined")
    return TrajectoryDataset(tracks, float(np.median(steps)), not explicit, str(path))


def save_trajectories(ds: TrajectoryDataset, path) -> None:
    """Write ``ds`` with explicit velocities; floats are written round-trip exact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED + VELOCITY)
        for vid in ds.vehicle_ids:
            for t, x, y, vx, vy in ds.tracks[vid].samples:
                w.writerow([vid, repr(float(t)), repr(float(x)), repr(float(y)),
                            repr(float(vx)), repr(float(vy))])


def world_at(ds: TrajectoryDataset, t: float) -> list[tuple[int, SvState]]:
    """Interpolated SV states at time ``t``, ordered by vehicle id.

    Vehicles whose recorded span does not contain ``t`` are left out.
    """
    t0, t1 = ds.span
    if not (t0 <= t <= t1):
        raise ValueError(f"time {t} out of range [{t0}, {t1}]")
    out = []
    for vid in ds.vehicle_ids:
        tr = ds.tracks[vid]
        ts = tr.t
        if t < ts[0] or t > ts[-1]:
            continue
        j = int(np.searchsorted(ts, t, side="right")) - 1
        if j >= len(ts) - 1:
            row = tr.samples[-1, 1:]
        else:
            s = (t - ts[j]) / (ts[j + 1] - ts[j])
            row = tr.samples[j, 1:] + s * (tr.samples[j + 1, 1:] - tr.samples[j, 1:])
        out.append((vid, SvState(*map(float, row))))
    return out


class ReplayEnvironment:
    """EV integrated with the vehicle model among pre-recorded, non-reactive SVs.

    The environment never alters SV motion; it only reports barrier overlaps.
    The episode ends when the next control period would leave the dataset span.
    """

    mode = "replay"

    def __init__(self, ds: TrajectoryDataset, ev_init: VehicleState, vehicle: VehicleParams = VehicleParams(),
                 dt: float = 0.08, substeps: int = 1, t_start: float | None = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.ds = ds
        self.dt = dt
        self.vehicle = vehicle
        self.substeps = substeps
        self.time = ds.span[0] if t_start is None else float(t_start)
        world_at(ds, self.time)  # range check
        self.ev = VehicleState(*map(float, ev_init))
        self.ev_init = self.ev
        self._steps = 0
        self._t0 = self.time

    def observe(self) -> Observation:
        return Observation(self.time, self.ev, tuple(world_at(self.ds, self.time)))

    def step(self, u) -> None:
        self.ev = dynamics.shoot_interval(self.ev, u, self.dt, self.substeps, self.vehicle)
        self._steps += 1
        # time from a step counter avoids accumulating float drift
        self.time = self._t0 + self._steps * self.dt

    def finished(self) -> bool:
        return self.time + self.dt > self.ds.span[1] + 1e-12

    def collision(self, sp: SafetyParams) -> CollisionReport:
        svs = world_at(self.ds, self.time)
        if not svs:
            return CollisionReport(False, False, math.inf)
        pos = np.array([[sv.ox, sv.oy] for _, sv in svs])
        min_h = float(np.min(barrier_h(np.array([self.ev.px, self.ev.py]), pos, sp)))
        return CollisionReport(min_h < 0, 0 <= min_h < sp.c, min_h)

    def describe(self) -> dict:
        return {"mode": self.mode, "dataset": self.ds.source, "dt": self.dt,
                "t_start": self._t0, "ev_init": list(self.ev_init), "dataset_summary": self.ds.summary()}


def synthetic_dataset(n_vehicles: int = 46, duration: float = 30.0, dt: float = 0.08,
                      lane_centers=(-10.0, -6.0, -2.0, 2.0, 6.0, 10.0), x_range=(-40.0, 200.0),
                      speed_range=(7.0, 12.0), seed: int = 0) -> TrajectoryDataset:
    """Constant-velocity traffic sampled at ``dt``, for tests and demos.

    Vehicles are spread over the lanes with non-overlapping initial slots so the
    recorded traffic itself is collision-free at the start.
    """
    rng = np.random.default_rng(seed)
    n_t = int(math.floor(duration / dt + 1e-9)) + 1  # last sample at or before ``duration``
    t = dt * np.arange(n_t)
    lanes = np.arange(n_vehicles) % len(lane_centers)
    tracks = {}
    for vid in range(n_vehicles):
        lane = lanes[vid]
        slot = vid // len(lane_centers)
        slots = max(1, -(-n_vehicles // len(lane_centers)))
        spacing = (x_range[1] - x_range[0]) / slots
        x0 = x_range[0] + spacing * (slot + 0.5 * rng.random() * 0.5)
        v = rng.uniform(*speed_range)
        y = np.full(n_t, lane_centers[lane])
        samples = np.column_stack([t, x0 + v * t, y, np.full(n_t, v), np.zeros(n_t)])
        tracks[vid] = Track(vid, samples)
    return TrajectoryDataset(tracks, dt)
