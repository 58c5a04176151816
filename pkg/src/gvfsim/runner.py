"""Lockstep multi-vehicle simulation, telemetry CSV, metrics and field grids."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .coordination import (
    CoordMessage,
    MessageBus,
    circle_phase,
    gvf_level_set_offset,
    pgvf_w_correction,
)
from .errors import GuidanceError, SingularField
from .gvf import field_2d, heading_rate_command
from .paths import ImplicitPathSpec, ParametricPathSpec
from .pgvf import field_xi, pgvf_guidance, step_w
from .scenario import ScenarioConfig
from .vehicle import ground_velocity, step_vehicle, wrap_angle

TELEMETRY_SCHEMA = "# gvfsim-telemetry v1"
TELEMETRY_COLUMNS = (
    "t", "vehicle", "x", "y", "z", "heading", "course", "roll_sp", "omega_cmd",
    "vz_cmd", "e", "e_x", "e_y", "e_z", "w", "coord", "msgs_rx",
)


class TelemetryRecord(NamedTuple):
    t: float
    vehicle: str
    x: float
    y: float
    z: float
    heading: float
    course: float
    roll_sp: float
    omega_cmd: float
    vz_cmd: float
    e: float | None
    e_x: float | None
    e_y: float | None
    e_z: float | None
    w: float | None
    coord: float
    msgs_rx: int


class GuidanceRuntimeError(GuidanceError):
    """A guidance law failed mid-run; carries the vehicle, time and state."""

    def __init__(self, vehicle: str, t: float, state, cause: Exception):
        self.vehicle, self.t, self.state, self.cause = vehicle, t, state, cause
        super().__init__(
            f"vehicle {vehicle!r} at t={t:.4f}s: {type(cause).__name__}: {cause}; state={state}"
        )


@dataclass
class VehicleMetrics:
    distance_metric: str
    steady_state_mean: float
    steady_state_max: float
    convergence_time: float | None
    first_order_mean: float | None = None


@dataclass
class Metrics:
    vehicles: dict[str, VehicleMetrics]
    consensus_trace: list[tuple[float, float]] = field(default_factory=list)
    bus: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        trace = self.consensus_trace
        return {
            "vehicles": {k: asdict(v) for k, v in self.vehicles.items()},
            "consensus": {
                "final_error": trace[-1][1] if trace else None,
                "trace": [list(p) for p in trace],
            },
            "bus": dict(self.bus),
        }


# --------------------------------------------------------------------------
# simulation


def _consensus_error(cfg: ScenarioConfig, states: dict) -> float:
    graph = cfg.coordination.graph
    worst = 0.0
    for (i, j), d in graph.offsets.items():
        if cfg.mode == "gvf":
            c = cfg.path.params[:2]
            gap = wrap_angle(
                circle_phase(states[j].x, states[j].y, c)
                - circle_phase(states[i].x, states[i].y, c)
                - d
            )
        else:
            gap = states[j].w - states[i].w - d
        worst = max(worst, abs(gap))
    return worst


def run_scenario(cfg: ScenarioConfig) -> tuple[list[TelemetryRecord], Metrics]:
    """Run to completion; raises GuidanceRuntimeError on a guidance failure."""
    dt = cfg.dt
    wind = cfg.wind
    path = cfg.path
    pgvf = cfg.mode == "pgvf"
    setups = cfg.vehicles
    states = {v.id: v.initial for v in setups}
    corrections = {v.id: 0.0 for v in setups}
    received = {v.id: 0 for v in setups}
    coord = cfg.coordination
    bus = MessageBus(coord.bus, coord.graph) if coord else None
    bus_every = int(round(coord.bus.period / dt)) if coord else 0
    center = path.params[:2] if (coord and not pgvf) else None
    history: dict[str, dict[float, float]] = {v.id: {} for v in setups}
    records: list[TelemetryRecord] = []
    trace: list[tuple[float, float]] = []

    for k in range(cfg.n_steps):
        t = k * dt
        if bus is not None and k % bus_every == 0:
            outbox = []
            for v in setups:
                st = states[v.id]
                payload = st.w if pgvf else circle_phase(st.x, st.y, center)
                outbox.append(CoordMessage(v.id, payload, t))
            for msg in outbox:
                history[msg.sender][msg.sent_at] = msg.payload
            arrived = bus.tick(outbox, t)
            for v in setups:
                received[v.id] += len(arrived[v.id])
                own = history[v.id]
                # compare each neighbor value with our own value broadcast at the same instant
                if pgvf:
                    corrections[v.id] = sum(
                        pgvf_w_correction(own[m.sent_at], [(m.payload, d)], coord.kc)
                        for m, d in bus.latest_messages(v.id)
                    )
                else:
                    corrections[v.id] = gvf_level_set_offset(
                        own[t],
                        [(m.payload + own[t] - own[m.sent_at], d) for m, d in bus.latest_messages(v.id)],
                        coord.kc,
                        coord.e_max,
                        v.gains.s,
                    )
                horizon = min(
                    [m.sent_at for m, _ in bus.latest_messages(v.id)] + [t - coord.bus.delay]
                )
                for stamp in [s for s in own if s < horizon - 1e-9]:
                    del own[stamp]
            trace.append((t, _consensus_error(cfg, states)))

        for v in setups:
            st = states[v.id]
            vg = ground_velocity(st, wind, t)
            try:
                if pgvf:
                    cmd = pgvf_guidance(
                        st, path, v.gains, vg, v.limits.omega_max, v.limits.vz_max, v.limits.roll_max
                    )
                else:
                    cmd = heading_rate_command(
                        st, path, v.gains, vg, v.limits.omega_max, v.limits.roll_max,
                        level_offset=corrections[v.id],
                    )
            except GuidanceError as exc:
                raise GuidanceRuntimeError(v.id, t, st, exc) from exc
            course = math.atan2(vg[1], vg[0])
            if pgvf:
                ex, ey = cmd.error[0], cmd.error[1]
                ez = cmd.error[2] if len(cmd.error) > 2 else None
                e, wv = None, st.w
            else:
                e, ex, ey, ez, wv = cmd.error, None, None, None, None
            records.append(
                TelemetryRecord(
                    t, v.id, st.x, st.y, st.z, st.heading, course, cmd.roll, cmd.omega,
                    cmd.vz, e, ex, ey, ez, wv, corrections[v.id], received[v.id],
                )
            )
            nxt = step_vehicle(st, cmd, wind, v.limits, dt)
            if pgvf:
                nxt = replace(nxt, w=step_w(st.w, cmd.w_rate + corrections[v.id], dt))
            if not all(map(math.isfinite, (nxt.x, nxt.y, nxt.z, nxt.heading, nxt.w))):
                raise GuidanceRuntimeError(
                    v.id, t, st, FloatingPointError("state became non-finite; gains too aggressive?")
                )
            states[v.id] = replace(nxt, t=(k + 1) * dt)

    metrics = compute_metrics(records, path, cfg.convergence_threshold)
    metrics.consensus_trace = trace
    if bus is not None:
        metrics.bus = {"sent": bus.sent, "delivered": bus.delivered, "dropped": bus.dropped}
    return records, metrics


# --------------------------------------------------------------------------
# telemetry files


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".9g")


def write_telemetry(records: Iterable[TelemetryRecord], fh) -> None:
    fh.write(TELEMETRY_SCHEMA + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TELEMETRY_COLUMNS)
    for r in records:
        writer.writerow([_fmt(v) for v in r])


def telemetry_text(records: Iterable[TelemetryRecord]) -> str:
    buf = io.StringIO()
    write_telemetry(records, buf)
    return buf.getvalue()


def write_metrics(metrics: Metrics, fh) -> None:
    json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
    fh.write("\n")


# --------------------------------------------------------------------------
# metrics


def ellipse_distance(xs, ys, center, a, b, rotation=0.0, iters: int = 40) -> np.ndarray:
    """Exact distance to an ellipse by projecting onto its parameterization."""
    c, s = math.cos(rotation), math.sin(rotation)
    dx = np.asarray(xs, dtype=float) - center[0]
    dy = np.asarray(ys, dtype=float) - center[1]
    u = c * dx + s * dy
    v = -s * dx + c * dy
    grid = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    d2 = (u[:, None] - a * np.cos(grid)) ** 2 + (v[:, None] - b * np.sin(grid)) ** 2
    th = grid[np.argmin(d2, axis=1)]
    for _ in range(iters):
        ct, st = np.cos(th), np.sin(th)
        # derivative and second derivative of half the squared distance
        g = (a * ct - u) * (-a * st) + (b * st - v) * (b * ct)
        h = (a * a * st * st + b * b * ct * ct) + (a * ct - u) * (-a * ct) + (b * st - v) * (-b * st)
        step = np.where(h > 0, g / np.where(h > 0, h, 1.0), 0.0)
        th = th - np.clip(step, -0.1, 0.1)
        if np.max(np.abs(step)) < 1e-12:
            break
    return np.hypot(u - a * np.cos(th), v - b * np.sin(th))


def distance_to_path(path, records: Sequence[TelemetryRecord]) -> tuple[np.ndarray, str, np.ndarray | None]:
    """Per-record distance, the name of the estimator used, and the first-order estimate."""
    xs = np.array([r.x for r in records])
    ys = np.array([r.y for r in records])
    if isinstance(path, ParametricPathSpec):
        e = np.array([[r.e_x, r.e_y, r.e_z if r.e_z is not None else 0.0] for r in records])
        return np.linalg.norm(e, axis=1), "parametric_error_norm", None
    first = np.empty(len(records))
    for i, (x, y) in enumerate(zip(xs, ys)):
        phi, g, _ = path.evaluate((x, y))
        gn = math.hypot(g[0], g[1])
        first[i] = abs(phi) / gn if gn > 0 else math.inf
    if path.name == "circle":
        cx, cy, r = path.params
        return np.abs(np.hypot(xs - cx, ys - cy) - r), "exact_radial", first
    if path.name == "ellipse":
        cx, cy, a, b, rot = path.params
        return ellipse_distance(xs, ys, (cx, cy), a, b, rot), "exact_projection", first
    return first, "first_order", first


def convergence_time(ts: np.ndarray, dist: np.ndarray, threshold: float) -> float | None:
    above = np.nonzero(dist >= threshold)[0]
    if len(above) == 0:
        return float(ts[0])
    last = above[-1]
    if last == len(ts) - 1:
        return None
    return float(ts[last + 1])


def compute_metrics(records: Sequence[TelemetryRecord], path, threshold: float = 5.0) -> Metrics:
    if not records:
        raise ValueError("no telemetry to summarize")
    by_vehicle: dict[str, list[TelemetryRecord]] = {}
    for r in records:
        by_vehicle.setdefault(r.vehicle, []).append(r)
    out = {}
    for vid, recs in by_vehicle.items():
        ts = np.array([r.t for r in recs])
        dist, kind, first = distance_to_path(path, recs)
        t_end = ts[-1]
        steady = ts >= ts[0] + 0.75 * (t_end - ts[0])
        out[vid] = VehicleMetrics(
            distance_metric=kind,
            steady_state_mean=float(np.mean(dist[steady])),
            steady_state_max=float(np.max(dist[steady])),
            convergence_time=convergence_time(ts, dist, threshold),
            first_order_mean=None if first is None else float(np.mean(first[steady])),
        )
    return Metrics(out)


def consensus_error(values: Sequence[float]) -> float:
    """Largest pairwise gap in a set of scalars (0 for identical traces)."""
    return float(np.max(values) - np.min(values)) if len(values) else 0.0


# --------------------------------------------------------------------------
# vector field grids

GVF_GRID_COLUMNS = ("x", "y", "unit_x", "unit_y", "singular")
PGVF_GRID_COLUMNS = ("x", "y", "z", "w", "unit_x", "unit_y", "unit_z", "singular")


def export_field_grid(
    path,
    mode: str,
    gains,
    bbox: Sequence[float],
    resolution: tuple[int, int],
    w: float | None = None,
    z: float | None = None,
) -> tuple[tuple[str, ...], list[tuple]]:
    """Unit field vectors on a regular grid over ``bbox = (xmin, xmax, ymin, ymax)``.

    For the parametric field the slice fixes ``w`` (default 0) and, in 3D,
    the altitude (default: the path altitude at that ``w``).
    """
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    xs = np.linspace(bbox[0], bbox[1], nx)
    ys = np.linspace(bbox[2], bbox[3], ny)
    rows = []
    if mode == "gvf":
        for y in ys:
            for x in xs:
                try:
                    u = field_2d((x, y), path, gains).unit
                    rows.append((x, y, u[0], u[1], 0))
                except SingularField:
                    rows.append((x, y, 0.0, 0.0, 1))
        return GVF_GRID_COLUMNS, rows

    w = 0.0 if w is None else float(w)
    wb = w * gains.beta * gains.s
    f, fd, _ = path.evaluate(wb)
    if path.n == 3 and z is None:
        z = float(f[2])
    for y in ys:
        for x in xs:
            p = (x, y, z) if path.n == 3 else (x, y)
            xi = field_xi(np.asarray(p) - f, fd, gains).xi_phys
            norm = float(np.linalg.norm(xi))
            if norm < 1e-12:
                rows.append((x, y, z if path.n == 3 else 0.0, w, 0.0, 0.0, 0.0, 1))
                continue
            u = xi / norm
            uz = u[2] if path.n == 3 else 0.0
            rows.append((x, y, z if path.n == 3 else 0.0, w, u[0], u[1], uz, 0))
    return PGVF_GRID_COLUMNS, rows


def write_grid(columns, rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def default_bbox(cfg: ScenarioConfig, margin: float = 0.5) -> tuple[float, float, float, float]:
    if cfg.bbox is not None:
        return cfg.bbox
    path = cfg.path
    if isinstance(path, ImplicitPathSpec):
        if path.extent is None:
            raise ValueError("path extent unknown; set field.bbox in the scenario")
        x0, x1, y0, y1 = path.extent
    else:
        ext = path.extent()
        x0, x1, y0, y1 = ext[0, 0], ext[0, 1], ext[1, 0], ext[1, 1]
    mx, my = margin * max(x1 - x0, 1.0), margin * max(y1 - y0, 1.0)
    return (x0 - mx, x1 + mx, y0 - my, y1 + my)
