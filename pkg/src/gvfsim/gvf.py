"""Guiding vector field for planar paths given as a level set ``phi(x, y) = 0``.

The field is the rotated gradient (tangent to the level sets) minus the
gradient scaled by the level-set error::

    pd_dot = s * E grad(phi) - ke * e * grad(phi),     E = [[0, -1], [1, 0]]

With ``s = +1`` a circle is flown counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularField, StallSpeed
from .vehicle import G, GuidanceCommand, VehicleState, wrap_angle

EPS_SINGULAR = 1e-6
V_MIN = 0.5


@dataclass(frozen=True)
class GvfGains:
    ke: float
    kn: float
    s: int = 1

    def __post_init__(self):
        if not self.ke > 0:
            raise ConfigError(f"ke must be positive, got {self.ke}")
        if not self.kn > 0:
            raise ConfigError(f"kn must be positive, got {self.kn}")
        if self.s not in (1, -1):
            raise ConfigError(f"s must be +1 or -1, got {self.s}")


@dataclass(frozen=True)
class FieldSample2D:
    pd_dot: np.ndarray
    unit: np.ndarray
    e: float
    grad_norm: float


def _rot90(v) -> np.ndarray:
    return np.array([-v[1], v[0]])


def field_2d(p, path, gains: GvfGains, level_offset: float = 0.0) -> FieldSample2D:
    """Evaluate the field at ``p``; ``level_offset`` shifts the tracked level set."""
    phi, n, _ = path.evaluate(p)
    e = phi - level_offset
    pd = gains.s * _rot90(n) - gains.ke * e * n
    norm = math.hypot(pd[0], pd[1])
    if norm < EPS_SINGULAR:
        raise SingularField(
            f"guiding field vanishes at ({p[0]:.6g}, {p[1]:.6g}): |pd_dot| = {norm:.3g}"
        )
    return FieldSample2D(pd, pd / norm, e, math.hypot(n[0], n[1]))


def field_material_derivative(
    p, v_ground, path, gains: GvfGains, level_offset: float = 0.0
) -> np.ndarray:
    """Time derivative of the unnormalized field seen by a point moving at ``v_ground``."""
    phi, n, H = path.evaluate(p)
    e = phi - level_offset
    pd = gains.s * _rot90(n) - gains.ke * e * n
    if math.hypot(pd[0], pd[1]) < EPS_SINGULAR:
        raise SingularField(f"guiding field vanishes at ({p[0]:.6g}, {p[1]:.6g})")
    v = np.asarray(v_ground, dtype=float)
    Hv = H @ v
    return gains.s * _rot90(Hv) - gains.ke * e * Hv - gains.ke * float(n @ v) * n


def roll_setpoint(omega: float, v_ground: float, roll_max: float = 0.75) -> float:
    """Bank angle of a coordinated turn at rate ``omega``, clamped to ``roll_max``."""
    if not v_ground > 0:
        raise StallSpeed(f"roll setpoint needs positive ground speed, got {v_ground}")
    roll = math.atan(omega * v_ground / G)
    return min(max(roll, -roll_max), roll_max)


def heading_rate_command(
    state: VehicleState,
    path,
    gains: GvfGains,
    ground_velocity,
    omega_max: float = math.inf,
    roll_max: float = 0.75,
    level_offset: float = 0.0,
) -> GuidanceCommand:
    """Turn-rate command aligning the ground course with the field.

    Feedforward is the turn rate of the field direction along the actual
    ground velocity; feedback is ``kn`` times the wrapped course error.
    """
    vx, vy = ground_velocity
    speed = math.hypot(vx, vy)
    if speed <= V_MIN:
        raise StallSpeed(f"ground speed {speed:.3g} m/s is below {V_MIN} m/s")
    p = (state.x, state.y)
    sample = field_2d(p, path, gains, level_offset)
    pd = sample.pd_dot
    dpd = field_material_derivative(p, (vx, vy), path, gains, level_offset)
    omega_ff = float(pd[0] * dpd[1] - pd[1] * dpd[0]) / float(pd @ pd)
    course = math.atan2(vy, vx)
    chi_d = math.atan2(sample.unit[1], sample.unit[0])
    omega = omega_ff + gains.kn * wrap_angle(chi_d - course)
    omega = min(max(omega, -omega_max), omega_max)
    return GuidanceCommand(
        omega=omega,
        roll=roll_setpoint(omega, speed, roll_max),
        vz=0.0,
        w_rate=0.0,
        error=sample.e + level_offset,
    )
