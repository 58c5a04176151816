"""Kinematic fixed-wing model flying at constant airspeed in wind.

The airframe points along ``heading``; the ground velocity is the air
velocity plus wind, so a vehicle steered by ground course crabs into the
wind on its own. Sideslip is not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ZeroGroundSpeed

G = 9.81
TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; an exact -pi maps to +pi."""
    r = math.fmod(a + math.pi, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    r -= math.pi
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    z: float = 0.0
    heading: float = 0.0
    airspeed: float = 11.0
    vertical_speed: float = 0.0
    w: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not self.airspeed > 0:
            raise ConfigError(f"airspeed must be positive, got {self.airspeed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class GuidanceCommand:
    omega: float  # heading-rate setpoint, rad/s
    roll: float = 0.0  # coordinated-turn roll equivalent, rad (telemetry only)
    vz: float = 0.0  # vertical-speed setpoint, m/s
    w_rate: float = 0.0
    error: object = None  # level-set value or error vector, for telemetry


@dataclass(frozen=True)
class WindModel:
    mean: tuple[float, float] = (0.0, 0.0)
    gust_amplitude: float = 0.0
    gust_period: float = 60.0
    seed: int = 0
    _phases: tuple[float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gust_amplitude < 0:
            raise ConfigError("gust_amplitude must be nonnegative")
        if not self.gust_period > 0:
            raise ConfigError("gust_period must be positive")
        object.__setattr__(self, "mean", (float(self.mean[0]), float(self.mean[1])))
        ph = np.random.default_rng(self.seed).uniform(0.0, TWO_PI, size=2)
        object.__setattr__(self, "_phases", (float(ph[0]), float(ph[1])))


def wind_at(wind: WindModel, t: float) -> tuple[float, float]:
    if wind.gust_amplitude == 0.0:
        return wind.mean
    arg = TWO_PI * t / wind.gust_period
    a = wind.gust_amplitude
    return (
        wind.mean[0] + a * math.cos(arg + wind._phases[0]),
        wind.mean[1] + a * math.sin(arg + wind._phases[1]),
    )


@dataclass(frozen=True)
class ActuatorLimits:
    omega_max: float
    roll_max: float = 0.75
    vz_max: float = 3.0
    vz_time_constant: float = 1.0

    def __post_init__(self):
        for name in ("omega_max", "roll_max", "vz_max", "vz_time_constant"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def for_airspeed(
        cls,
        airspeed: float,
        roll_max: float = 0.75,
        vz_max: float = 3.0,
        vz_time_constant: float = 1.0,
    ) -> "ActuatorLimits":
        """Limits whose turn-rate bound matches a coordinated turn at ``roll_max``."""
        return cls(G * math.tan(roll_max) / airspeed, roll_max, vz_max, vz_time_constant)


def ground_velocity(state: VehicleState, wind: WindModel, t: float | None = None):
    wx, wy = wind_at(wind, state.t if t is None else t)
    return (
        state.airspeed * math.cos(state.heading) + wx,
        state.airspeed * math.sin(state.heading) + wy,
    )


def ground_course_and_speed(state: VehicleState, wind: WindModel, t: float | None = None):
    vx, vy = ground_velocity(state, wind, t)
    speed = math.hypot(vx, vy)
    if speed < 1e-9:
        raise ZeroGroundSpeed(
            f"ground speed {speed:.3g} m/s: wind cancels airspeed at t={state.t}"
        )
    return math.atan2(vy, vx), speed


def step_vehicle(
    state: VehicleState,
    cmd: GuidanceCommand,
    wind: WindModel,
    limits: ActuatorLimits,
    dt: float,
) -> VehicleState:
    """Advance one fixed step: RK4 on (x, y, heading), exact first-order lag on climb rate."""
    if not 0.0 < dt <= 0.1:
        raise ConfigError(f"dt must lie in (0, 0.1], got {dt}")
    omega = min(max(cmd.omega, -limits.omega_max), limits.omega_max)
    va = state.airspeed
    t0 = state.t

    def deriv(t, psi):
        wx, wy = wind_at(wind, t)
        return va * math.cos(psi) + wx, va * math.sin(psi) + wy

    psi = state.heading
    k1 = deriv(t0, psi)
    k2 = deriv(t0 + 0.5 * dt, psi + 0.5 * dt * omega)
    k3 = k2  # heading rate is constant over the step, so stage 3 equals stage 2
    k4 = deriv(t0 + dt, psi + dt * omega)
    x = state.x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    y = state.y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])

    vz_target = min(max(cmd.vz, -limits.vz_max), limits.vz_max)
    tau = limits.vz_time_constant
    decay = math.exp(-dt / tau)
    gap = state.vertical_speed - vz_target
    z = state.z + vz_target * dt + gap * tau * (1.0 - decay)
    vz = vz_target + gap * decay

    return replace(
        state, x=x, y=y, z=z, heading=psi + omega * dt, vertical_speed=vz, t=t0 + dt
    )
