"""Scenario files: JSON in, validated runtime objects out.

Top-level keys (unknown keys are rejected)::

    mode          "gvf" | "pgvf"
    trajectory    {"builtin": name, "params": [...]}
                | {"implicit": "<phi(x,y)>", "params": {name: value}}
                | {"parametric": ["<f1(w)>", ...], "params": {name: value}}
                | {"file": "relative/or/absolute/path"}
    gains         gvf: ke, kn, s      pgvf: kx, ky, kz, kn, beta, s
    vehicles      [{id, x, y, z, heading, airspeed, w, gains?}]
    wind          {mean, gust_amplitude, gust_period, seed}
    limits        {roll_max, vz_max, vz_time_constant}
    coordination  {kc, e_max, edges: [[i, j, offset]], bus: {period, delay,
                   drop_probability, seed}}
    duration, dt, seed
    metrics       {convergence_threshold}
    field         {bbox: [xmin, xmax, ymin, ymax]}

Missing sub-seeds (wind, bus) are derived from the top-level ``seed``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import paths as path_lib
from .coordination import BusConfig, CommGraph
from .errors import ConfigError, ExprError
from .expr import compile_implicit_path, compile_parametric_path, load_path_file
from .gvf import GvfGains
from .pgvf import PGvfGains
from .vehicle import ActuatorLimits, VehicleState, WindModel

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TrajectoryModel(_Strict):
    builtin: Optional[str] = None
    params: Union[list[float], dict[str, float], None] = None
    implicit: Optional[str] = None
    parametric: Optional[list[str]] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("builtin", "implicit", "parametric", "file") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(
                "trajectory needs exactly one of builtin, implicit, parametric, file"
            )
        if self.builtin is not None and isinstance(self.params, dict):
            raise ValueError("builtin trajectory parameters are positional (a list)")
        if (self.implicit or self.parametric) and isinstance(self.params, list):
            raise ValueError("expression parameters must be a name -> value mapping")
        return self


class GvfGainsModel(_Strict):
    ke: float = Field(1e-3, gt=0)
    kn: float = Field(1.0, gt=0)
    s: Literal[1, -1] = 1


class PGvfGainsModel(_Strict):
    kx: float = Field(0.05, gt=0)
    ky: float = Field(0.05, gt=0)
    kz: float = Field(0.05, gt=0)
    kn: float = Field(3.0, gt=0)
    beta: float = Field(0.01, gt=0)
    s: Literal[1, -1] = 1


class VehicleModel(_Strict):
    id: str
    x: float
    y: float
    z: float = 0.0
    heading: float = 0.0
    airspeed: float = Field(11.0, gt=0)
    w: float = 0.0
    gains: Optional[dict[str, float]] = None


class WindConfig(_Strict):
    mean: tuple[float, float] = (0.0, 0.0)
    gust_amplitude: float = Field(0.0, ge=0)
    gust_period: float = Field(60.0, gt=0)
    seed: Optional[int] = None


class LimitsConfig(_Strict):
    roll_max: float = Field(0.75, gt=0, lt=math.pi / 2)
    vz_max: float = Field(3.0, gt=0)
    vz_time_constant: float = Field(1.0, gt=0)


class BusModel(_Strict):
    period: float = Field(0.1, gt=0)
    delay: float = Field(0.0, ge=0)
    drop_probability: float = Field(0.0, ge=0, le=1)
    seed: Optional[int] = None


class CoordinationModel(_Strict):
    kc: float = Field(gt=0)
    e_max: float = Field(1.0, gt=0)
    edges: list[Annotated[list[Union[str, float]], Field(min_length=2, max_length=3)]]
    bus: BusModel = BusModel()


class MetricsModel(_Strict):
    convergence_threshold: float = Field(5.0, gt=0)


class FieldModel(_Strict):
    bbox: tuple[float, float, float, float]


class ScenarioModel(_Strict):
    schema_: int = Field(SCHEMA_VERSION, alias="schema")
    mode: Literal["gvf", "pgvf"]
    trajectory: TrajectoryModel
    gains: dict[str, float] = {}
    vehicles: list[VehicleModel] = Field(min_length=1)
    wind: WindConfig = WindConfig()
    limits: LimitsConfig = LimitsConfig()
    coordination: Optional[CoordinationModel] = None
    duration: float = Field(gt=0)
    dt: float = Field(0.02, gt=0, le=0.1)
    seed: int = 0
    metrics: MetricsModel = MetricsModel()
    field: Optional[FieldModel] = None

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.schema_ != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema {self.schema_}")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ValueError("vehicle ids must be unique")
        if self.coordination is not None:
            ratio = self.coordination.bus.period / self.dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(
                    f"coordination.bus.period ({self.coordination.bus.period}) "
                    f"must be a whole multiple of dt ({self.dt})"
                )
        return self


@dataclass(frozen=True)
class VehicleSetup:
    id: str
    initial: VehicleState
    gains: object
    limits: ActuatorLimits


@dataclass(frozen=True)
class Coordination:
    kc: float
    e_max: float
    graph: CommGraph
    bus: BusConfig


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    path: object
    trajectory_label: str
    vehicles: tuple[VehicleSetup, ...]
    wind: WindModel
    coordination: Optional[Coordination]
    duration: float
    dt: float
    seed: int
    convergence_threshold: float
    bbox: Optional[tuple[float, float, float, float]]
    raw: ScenarioModel

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def _format_validation(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "invalid scenario: " + "; ".join(lines)


def _build_path(traj: TrajectoryModel, base_dir: Path):
    try:
        if traj.builtin is not None:
            return path_lib.make_path(traj.builtin, traj.params or []), traj.builtin
        if traj.implicit is not None:
            return compile_implicit_path(traj.implicit, traj.params or {}), "implicit-dsl"
        if traj.parametric is not None:
            return compile_parametric_path(traj.parametric, traj.params or {}), "parametric-dsl"
        file = Path(traj.file)
        if not file.is_absolute():
            file = base_dir / file
        return load_path_file(file), f"file:{traj.file}"
    except ExprError as exc:
        raise ConfigError(f"trajectory: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"trajectory.file: {exc}") from exc


def build_scenario(model: ScenarioModel, base_dir: Path | str = ".", seed: int | None = None) -> ScenarioConfig:
    """Turn a validated model into runtime objects; ``seed`` overrides the file's seed."""
    seed = model.seed if seed is None else int(seed)
    path, label = _build_path(model.trajectory, Path(base_dir))
    is_parametric = isinstance(path, path_lib.ParametricPathSpec)
    if (model.mode == "pgvf") != is_parametric:
        kind = "parametric" if is_parametric else "implicit"
        raise ConfigError(f"mode {model.mode!r} cannot fly a {kind} trajectory")

    gains_model = PGvfGainsModel if model.mode == "pgvf" else GvfGainsModel
    gains_cls = PGvfGains if model.mode == "pgvf" else GvfGains
    vehicles = []
    for idx, v in enumerate(model.vehicles):
        merged = {**model.gains, **(v.gains or {})}
        try:
            gm = gains_model(**merged)
        except ValidationError as exc:
            where = f"vehicles.{idx}.gains" if v.gains else "gains"
            raise ConfigError(f"{where}: {_format_validation(exc)}") from exc
        state = VehicleState(x=v.x, y=v.y, z=v.z, heading=v.heading, airspeed=v.airspeed, w=v.w)
        limits = ActuatorLimits.for_airspeed(
            v.airspeed, model.limits.roll_max, model.limits.vz_max, model.limits.vz_time_constant
        )
        vehicles.append(VehicleSetup(v.id, state, gains_cls(**gm.model_dump()), limits))

    wind = WindModel(
        mean=model.wind.mean,
        gust_amplitude=model.wind.gust_amplitude,
        gust_period=model.wind.gust_period,
        seed=seed if model.wind.seed is None else model.wind.seed,
    )

    coordination = None
    if model.coordination is not None:
        c = model.coordination
        if model.mode == "gvf" and path.name != "circle":
            raise ConfigError(
                "coordination: level-set synchronization supports only the 'circle' trajectory"
            )
        edges = []
        for e in c.edges:
            if not (isinstance(e[0], str) and isinstance(e[1], str)):
                raise ConfigError(f"coordination.edges: vehicle ids must be strings in {e!r}")
            edges.append(tuple(e))
        modulus = 2 * math.pi if model.mode == "gvf" else None
        graph = CommGraph.from_edges([v.id for v in model.vehicles], edges, modulus)
        bus = BusConfig(
            period=c.bus.period,
            delay=c.bus.delay,
            drop_probability=c.bus.drop_probability,
            seed=seed + 1 if c.bus.seed is None else c.bus.seed,
        )
        coordination = Coordination(c.kc, c.e_max, graph, bus)

    bbox = tuple(model.field.bbox) if model.field is not None else None
    return ScenarioConfig(
        mode=model.mode,
        path=path,
        trajectory_label=label,
        vehicles=tuple(vehicles),
        wind=wind,
        coordination=coordination,
        duration=model.duration,
        dt=model.dt,
        seed=seed,
        convergence_threshold=model.metrics.convergence_threshold,
        bbox=bbox,
        raw=model,
    )


def parse_scenario(data: dict, base_dir: Path | str = ".", seed: int | None = None) -> ScenarioConfig:
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc
    return build_scenario(model, base_dir, seed)


def load_scenario(path, seed: int | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_scenario(data, path.parent, seed)
