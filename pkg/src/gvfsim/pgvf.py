"""Singularity-free guiding field for parametric paths.

The path parameter ``w`` is promoted to an extra coordinate. With the scaled
parameter ``wb = w * beta * s`` the errors are ``e_i = p_i - f_i(wb)`` and
each surface ``e_i = 0`` has gradient ``(unit_i, -beta s f_i'(wb))`` in
``(p, w)`` space. The field is

    xi = T - sum_i k_i e_i grad(e_i),   T = (-1)^n (beta s f'(wb), 1)

where ``T`` is the generalized cross product of the ``n`` gradients, so it is
orthogonal to all of them. The two terms are therefore never both zero and
``xi`` cannot vanish anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateHorizontal, StallSpeed
from .gvf import V_MIN, roll_setpoint
from .vehicle import GuidanceCommand, VehicleState, wrap_angle

EPS_HORIZONTAL = 1e-9


@dataclass(frozen=True)
class PGvfGains:
    kx: float
    ky: float
    kz: float = 1.0
    kn: float = 1.0
    beta: float = 1.0
    s: int = 1

    def __post_init__(self):
        for name in ("kx", "ky", "kz", "kn", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.s not in (1, -1):
            raise ConfigError(f"s must be +1 or -1, got {self.s}")

    def k(self, n: int) -> np.ndarray:
        return np.array((self.kx, self.ky, self.kz)[:n])


@dataclass(frozen=True)
class XiSample:
    e: np.ndarray
    xi: np.ndarray
    xi_phys: np.ndarray
    xi_w: float


def parametric_errors(p, w, path, gains: PGvfGains) -> np.ndarray:
    """``p - f(w * beta * s)``; ``p`` may carry extra trailing axes for batches."""
    p = np.asarray(p, dtype=float)
    return p[: path.n] - path.f(w * gains.beta * gains.s)


def field_xi(e, fd, gains: PGvfGains) -> XiSample:
    """Augmented field from errors ``e`` and path derivative ``fd`` (both taken at ``wb``)."""
    e = np.asarray(e, dtype=float)
    fd = np.asarray(fd, dtype=float)
    n = e.shape[0]
    if n not in (2, 3):
        raise ConfigError(f"parametric fields need n in (2, 3), got {n}")
    sign = 1.0 if n % 2 == 0 else -1.0
    k = gains.k(n).reshape((n,) + (1,) * (e.ndim - 1))
    c = gains.beta * gains.s * fd  # -d e_i / d w
    ke = k * e
    xi_phys = sign * c - ke
    xi_w = sign + np.sum(ke * c, axis=0)
    xi = np.concatenate([xi_phys, np.expand_dims(xi_w, 0)], axis=0)
    return XiSample(e, xi, xi_phys, xi_w)


def pgvf_guidance(
    state: VehicleState,
    path,
    gains: PGvfGains,
    ground_velocity,
    omega_max: float = math.inf,
    vz_max: float = math.inf,
    roll_max: float = 0.75,
) -> GuidanceCommand:
    """Heading-rate, vertical-speed and w-rate setpoints from the augmented field.

    The w rate and climb rate are scaled so that the commanded motion in
    ``(x, y, z, w)`` is the field direction traversed at the current ground
    speed.
    """
    vx, vy = ground_velocity
    speed = math.hypot(vx, vy)
    if speed <= V_MIN:
        raise StallSpeed(f"ground speed {speed:.3g} m/s is below {V_MIN} m/s")
    wb = state.w * gains.beta * gains.s
    f, fd, _ = path.evaluate(wb)
    p = (state.x, state.y, state.z)[: path.n]
    e = np.asarray(p) - f
    sample = field_xi(e, fd, gains)
    xh, yh = float(sample.xi[0]), float(sample.xi[1])
    h = math.hypot(xh, yh)
    if h <= EPS_HORIZONTAL:
        raise DegenerateHorizontal(
            f"horizontal field component {h:.3g} at w={state.w:.6g}: no course to follow"
        )
    course = math.atan2(vy, vx)
    omega = gains.kn * wrap_angle(math.atan2(yh, xh) - course)
    omega = min(max(omega, -omega_max), omega_max)
    scale = speed / h
    vz = 0.0
    if path.n == 3:
        vz = min(max(float(sample.xi[2]) * scale, -vz_max), vz_max)
    return GuidanceCommand(
        omega=omega,
        roll=roll_setpoint(omega, speed, roll_max),
        vz=vz,
        w_rate=float(sample.xi_w) * scale,
        error=tuple(float(v) for v in e),
    )


def step_w(w: float, w_rate: float, dt: float) -> float:
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    return w + w_rate * dt
