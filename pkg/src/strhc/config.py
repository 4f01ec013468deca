"""Sectioned key-value run configuration.

A config file looks like::

    [run]
    mode = sim            # sim | replay
    duration = 40
    seed = 3

    [safety]
    c = 1
    gamma = 50

    [vehicle]
    kf = -128916

Every key may also be written fully qualified (``safety.c = 1``) inside any
section. Unset keys keep their defaults. Errors name the file line they come
from.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .controller import EscapeConfig
from .params import (Bounds, ConfigError, CostWeights, OcpConfig, PlannerConfig, SafetyParams,
                     TaskSpec, VehicleParams, VehicleState)
from .sim import IdmParams, ScenarioConfig

# symbol spellings accepted in addition to the field names
ALIASES = {
    "safety": {"a": "a_axis", "b": "b_axis", "lambda": "lam"},
    "costs": {},
}

BUNDLES = {
    "vehicle": VehicleParams,
    "bounds": Bounds,
    "safety": SafetyParams,
    "costs": CostWeights,
    "task": TaskSpec,
    "ocp": OcpConfig,
    "scenario": ScenarioConfig,
    "idm": IdmParams,
    "escape": EscapeConfig,
}
REPLAY_TS, REPLAY_N = 0.08, 70
# scenario fields that are owned by other sections
_SCENARIO_DERIVED = {"idm", "task", "vehicle", "substeps", "rng_seed"}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run, with defaults expanded."""

    mode: str = "sim"
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    escape: EscapeConfig = field(default_factory=EscapeConfig)
    dataset: str | None = None
    ev_init: VehicleState | None = None
    t_start: float | None = None
    duration: float | None = None
    seed: int = 0
    out: str = "out"
    ablation: str | None = None

    def __post_init__(self):
        if self.mode not in ("sim", "replay"):
            raise ConfigError(f"mode must be sim or replay, got {self.mode!r}")
        if self.ablation not in (None, "fixed-attention"):
            raise ConfigError(f"unknown ablation {self.ablation!r} (only fixed-attention)")
        if self.mode == "replay":
            if not self.dataset:
                raise ConfigError("replay mode needs run.dataset")
            if not Path(self.dataset).is_file():
                raise ConfigError(f"dataset not found: {self.dataset}")
        if self.duration is not None and not self.duration > 0:
            raise ConfigError("run.duration must be positive")

    @property
    def ev_start(self) -> VehicleState:
        if self.ev_init is not None:
            return self.ev_init
        return self.scenario.ev_init

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=int(seed),
                                   scenario=dataclasses.replace(self.scenario, rng_seed=int(seed)))

    def with_ablation(self, ablation: str | None) -> "RunConfig":
        return dataclasses.replace(self, ablation=ablation)

    def with_out(self, out: str) -> "RunConfig":
        return dataclasses.replace(self, out=str(out))

    def to_dict(self) -> dict:
        from .controller import _jsonable
        return _jsonable(dataclasses.asdict(self))


def _parse_value(text: str, default, name: str):
    try:
        return _parse_typed(text.strip(), default, name)
    except ValueError as exc:
        if str(exc).startswith(name):
            raise
        raise ValueError(f"{name}: cannot parse {text.strip()!r}") from None


def _parse_typed(text: str, default, name: str):
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            f = float(text)
            if not f.is_integer():
                raise ValueError(f"{name}: expected an integer, got {text!r}") from None
            return int(f)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple) or default is None:
        if text.lower() in ("", "none"):
            return None
        vals = tuple(float(v) for v in re.split(r"[,\s]+", text) if v)
        if hasattr(default, "_fields"):
            if len(vals) != len(default._fields):
                raise ValueError(f"{name}: expected {len(default._fields)} values, got {len(vals)}")
            return type(default)(*vals)
        if isinstance(default, tuple) and len(default) and len(vals) != len(default):
            raise ValueError(f"{name}: expected {len(default)} values, got {len(vals)}")
        return vals
    if isinstance(default, str):
        return text
    raise ValueError(f"{name}: unsupported setting")


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` to the 1-based line where the key is set."""
    where, section = {}, ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section:
            where[(section, m.group(1).strip())] = i
    return where


_RUN_KEYS = {"mode": "sim", "dataset": None, "duration": 0.0, "seed": 0, "out": "out",
             "ablation": None, "ev_init": VehicleState(0, 0, 0, 0, 0, 0), "t_start": 0.0}


def parse_config(text: str, source: str = "<config>", base_dir=None) -> RunConfig:
    """Parse config text into a validated :class:`RunConfig`.

    A relative ``run.dataset`` is taken relative to ``base_dir`` when given.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str  # symbols are case sensitive (Iz, M, N)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    lines = _line_index(text)

    values: dict[str, dict] = {name: {} for name in list(BUNDLES) + ["run"]}
    for section in cp.sections():
        for key, raw in cp.items(section):
            line = lines.get((section, key), "?")
            anchor = f"{source}, line {line}"
            if "." in key:
                sec, name = key.split(".", 1)
            else:
                sec, name = section, key
            if sec not in values:
                raise ConfigError(f"{anchor}: unknown section {sec!r}")
            name = ALIASES.get(sec, {}).get(name, name)
            if sec == "run":
                if name not in _RUN_KEYS:
                    raise ConfigError(f"{anchor}: unknown key run.{name}")
                default = _RUN_KEYS[name]
                if name in ("dataset", "ablation"):
                    default = ""
            else:
                fields = {f.name: f for f in dataclasses.fields(BUNDLES[sec])}
                if name not in fields or (sec == "scenario" and name in _SCENARIO_DERIVED):
                    raise ConfigError(f"{anchor}: unknown key {sec}.{name}")
                f = fields[name]
                default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
            if name in values[sec]:
                raise ConfigError(f"{anchor}: {sec}.{name} set twice")
            try:
                val = _parse_value(raw, default, f"{sec}.{name}")
            except ValueError as exc:
                raise ConfigError(f"{anchor}: {exc}") from None
            if sec == "run" and name in ("dataset", "ablation") and val in ("", "none"):
                val = None
            values[sec][name] = (val, anchor)

    def build(sec):
        kwargs = {k: v for k, (v, _) in values[sec].items()}
        try:
            return BUNDLES[sec](**kwargs)
        except (ValueError, TypeError) as exc:
            anchors = ", ".join(a for _, a in values[sec].values()) or source
            raise ConfigError(f"[{sec}] ({anchors}): {exc}") from None

    mode = values["run"].get("mode", ("sim", None))[0]
    if mode == "replay":
        # recorded traffic runs at its own rate and horizon unless overridden
        values["ocp"].setdefault("Ts", (REPLAY_TS, source))
        values["ocp"].setdefault("N", (REPLAY_N, source))
    vehicle, bounds, safety = build("vehicle"), build("bounds"), build("safety")
    weights, task, ocp = build("costs"), build("task"), build("ocp")
    try:
        planner = PlannerConfig(vehicle, bounds, safety, weights, task, ocp)
    except ValueError as exc:
        anchors = ", ".join(a for _, a in list(values["task"].values()) + list(values["bounds"].values()))
        raise ConfigError(f"{anchors or source}: {exc}") from None

    run = {k: v for k, (v, _) in values["run"].items()}
    if run.get("dataset") and base_dir is not None and not Path(run["dataset"]).is_absolute():
        run["dataset"] = str(Path(base_dir) / run["dataset"])
    seed = run.pop("seed", 0)
    scen_kw = {k: v for k, (v, _) in values["scenario"].items()}
    try:
        scenario = ScenarioConfig(**scen_kw, idm=build("idm"), task=task, vehicle=vehicle,
                                  substeps=ocp.substeps, rng_seed=seed)
        return RunConfig(planner=planner, scenario=scenario, escape=build("escape"), seed=seed, **run)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    # dataset paths are relative to the config file
    return parse_config(text, source=str(path), base_dir=path.parent)


def render_config(cfg: RunConfig) -> str:
    """Fully expanded config text; parsing it gives back ``cfg``."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ", ".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return "none" if v is None else str(v)

    out = ["[run]", f"mode = {cfg.mode}", f"seed = {cfg.seed}", f"out = {cfg.out}",
           f"ablation = {fmt(cfg.ablation)}", f"dataset = {fmt(cfg.dataset)}"]
    for k in ("duration", "t_start", "ev_init"):
        if getattr(cfg, k) is not None:
            out.append(f"{k} = {fmt(getattr(cfg, k))}")
    p = cfg.planner
    bundles = {"vehicle": p.vehicle, "bounds": p.bounds, "safety": p.safety, "costs": p.weights,
               "task": p.task, "ocp": p.ocp, "idm": cfg.scenario.idm, "escape": cfg.escape}
    for name, obj in bundles.items():
        out += ["", f"[{name}]"] + [f"{f.name} = {fmt(getattr(obj, f.name))}"
                                    for f in dataclasses.fields(obj)]
    out += ["", "[scenario]"] + [f"{f.name} = {fmt(getattr(cfg.scenario, f.name))}"
                                 for f in dataclasses.fields(cfg.scenario)
                                 if f.name not in _SCENARIO_DERIVED]
    return "\n".join(out) + "\n"
