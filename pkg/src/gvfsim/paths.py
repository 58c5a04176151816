"""Built-in trajectories with hand-written derivatives, and the name registry.

Implicit paths are zero level sets of ``phi(x, y)``; parametric paths are
curves ``f(w)`` in 2D or 3D. Parametric evaluators accept scalar or array
``w`` and stack coordinates along axis 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ImplicitPathSpec:
    phi: Callable
    grad: Callable
    hess: Callable
    params: tuple = ()
    name: str = "implicit"
    source: object = None
    evaluate_all: Callable | None = field(default=None, repr=False)
    # (xmin, xmax, ymin, ymax) of the zero set when known
    extent: tuple | None = None

    def evaluate(self, p):
        """Return ``(phi, grad, hess)`` at ``p``."""
        if self.evaluate_all is not None:
            return self.evaluate_all(p)
        return self.phi(p), self.grad(p), self.hess(p)


@dataclass(frozen=True)
class ParametricPathSpec:
    n: int
    f: Callable
    fd: Callable
    fdd: Callable
    params: tuple = ()
    name: str = "parametric"
    source: object = None
    evaluate_all: Callable | None = field(default=None, repr=False)

    def evaluate(self, w):
        """Return ``(f, fd, fdd)`` at ``w``."""
        if self.evaluate_all is not None:
            return self.evaluate_all(w)
        return self.f(w), self.fd(w), self.fdd(w)

    def extent(self, samples: int = 721, period: float = 2 * math.pi) -> np.ndarray:
        """Per-axis (min, max) rows from sampling one period of ``w``."""
        pts = np.asarray(self.f(np.linspace(0.0, period, samples)))
        return np.stack([pts.min(axis=1), pts.max(axis=1)], axis=1)


def circle_implicit(center: Sequence[float], r: float) -> ImplicitPathSpec:
    if not r > 0:
        raise ConfigError(f"circle radius must be positive, got {r}")
    cx, cy = float(center[0]), float(center[1])
    r2 = float(r) * float(r)
    hess = np.array([[2.0, 0.0], [0.0, 2.0]])

    def phi(p):
        dx, dy = p[0] - cx, p[1] - cy
        return dx * dx + dy * dy - r2

    def grad(p):
        return np.array([2.0 * (p[0] - cx), 2.0 * (p[1] - cy)])

    def evaluate_all(p):
        dx, dy = p[0] - cx, p[1] - cy
        return dx * dx + dy * dy - r2, np.array([2.0 * dx, 2.0 * dy]), hess.copy()

    return ImplicitPathSpec(
        phi=phi,
        grad=grad,
        hess=lambda p: hess.copy(),
        params=(cx, cy, float(r)),
        name="circle",
        evaluate_all=evaluate_all,
        extent=(cx - r, cx + r, cy - r, cy + r),
    )


def ellipse_implicit(
    center: Sequence[float], a: float, b: float, rotation: float = 0.0
) -> ImplicitPathSpec:
    """Normalized ellipse ``(x'/a)^2 + (y'/b)^2 - 1`` with ``x'`` along the rotated major axis."""
    if not (a > 0 and b > 0):
        raise ConfigError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
    cx, cy = float(center[0]), float(center[1])
    c, s = math.cos(rotation), math.sin(rotation)
    ia2, ib2 = 1.0 / (a * a), 1.0 / (b * b)
    # x' = c dx + s dy, y' = -s dx + c dy
    h11 = 2.0 * (c * c * ia2 + s * s * ib2)
    h12 = 2.0 * c * s * (ia2 - ib2)
    h22 = 2.0 * (s * s * ia2 + c * c * ib2)
    hess = np.array([[h11, h12], [h12, h22]])

    def local(p):
        dx, dy = p[0] - cx, p[1] - cy
        return c * dx + s * dy, -s * dx + c * dy

    def phi(p):
        u, v = local(p)
        return u * u * ia2 + v * v * ib2 - 1.0

    def grad(p):
        u, v = local(p)
        gu, gv = 2.0 * u * ia2, 2.0 * v * ib2
        return np.array([c * gu - s * gv, s * gu + c * gv])

    def evaluate_all(p):
        return phi(p), grad(p), hess.copy()

    hx = math.hypot(a * c, b * s)
    hy = math.hypot(a * s, b * c)
    return ImplicitPathSpec(
        phi=phi,
        grad=grad,
        hess=lambda p: hess.copy(),
        params=(cx, cy, float(a), float(b), float(rotation)),
        name="ellipse",
        evaluate_all=evaluate_all,
        extent=(cx - hx, cx + hx, cy - hy, cy + hy),
    )


def ellipse3d_parametric(
    xo: float, yo: float, r: float, zl: float, zh: float, alpha: float
) -> ParametricPathSpec:
    """Tilted circle: horizontal radius ``r``, altitude swinging between ``zl`` and ``zh``.

    ``alpha`` is in degrees and sets where along the lap the high point sits.
    """
    if not r > 0:
        raise ConfigError(f"ellipse3d radius must be positive, got {r}")
    if zh < zl:
        raise ConfigError(f"ellipse3d needs zh >= zl, got zl={zl}, zh={zh}")
    alpha_rad = alpha * math.pi / 180.0
    half = 0.5 * (zl - zh)

    def evaluate_all(w):
        cw, sw = np.cos(w), np.sin(w)
        sa, ca = np.sin(alpha_rad - w), np.cos(alpha_rad - w)
        f = np.array([r * cw + xo, r * sw + yo, 0.5 * (zh + zl) + half * sa])
        fd = np.array([-r * sw, r * cw, -half * ca])
        fdd = np.array([-r * cw, -r * sw, -half * sa])
        return f, fd, fdd

    return ParametricPathSpec(
        n=3,
        f=lambda w: evaluate_all(w)[0],
        fd=lambda w: evaluate_all(w)[1],
        fdd=lambda w: evaluate_all(w)[2],
        params=(xo, yo, r, zl, zh, alpha),
        name="ellipse3d",
        evaluate_all=evaluate_all,
    )


def lissajous3d_parametric(
    center: Sequence[float],
    amplitudes: Sequence[float],
    frequencies: Sequence[float],
    phases: Sequence[float],
) -> ParametricPathSpec:
    """``f_i(w) = c_i + A_i cos(omega_i w + phase_i)`` on each axis."""
    c = np.asarray(center, dtype=float)
    amp = np.asarray(amplitudes, dtype=float)
    om = np.asarray(frequencies, dtype=float)
    ph = np.asarray(phases, dtype=float)
    for arr, label in ((c, "center"), (amp, "amplitudes"), (om, "frequencies"), (ph, "phases")):
        if arr.shape != (3,):
            raise ConfigError(f"lissajous3d {label} must have 3 entries")
    if np.any(amp < 0):
        raise ConfigError("lissajous3d amplitudes must be nonnegative")
    if np.any(om < 0):
        raise ConfigError("lissajous3d frequencies must be nonnegative")

    def evaluate_all(w):
        w = np.asarray(w, dtype=float)
        arg = np.multiply.outer(om, w) + ph.reshape((3,) + (1,) * w.ndim)
        shape = (3,) + (1,) * w.ndim
        A, O, C = amp.reshape(shape), om.reshape(shape), c.reshape(shape)
        cs, sn = np.cos(arg), np.sin(arg)
        return C + A * cs, -A * O * sn, -A * O * O * cs

    return ParametricPathSpec(
        n=3,
        f=lambda w: evaluate_all(w)[0],
        fd=lambda w: evaluate_all(w)[1],
        fdd=lambda w: evaluate_all(w)[2],
        params=tuple(c) + tuple(amp) + tuple(om) + tuple(ph),
        name="lissajous3d",
        evaluate_all=evaluate_all,
    )


def circle2d_parametric(xo: float, yo: float, r: float) -> ParametricPathSpec:
    if not r > 0:
        raise ConfigError(f"circle radius must be positive, got {r}")

    def evaluate_all(w):
        cw, sw = np.cos(w), np.sin(w)
        return (
            np.array([r * cw + xo, r * sw + yo]),
            np.array([-r * sw, r * cw]),
            np.array([-r * cw, -r * sw]),
        )

    return ParametricPathSpec(
        n=2,
        f=lambda w: evaluate_all(w)[0],
        fd=lambda w: evaluate_all(w)[1],
        fdd=lambda w: evaluate_all(w)[2],
        params=(xo, yo, r),
        name="circle2d_param",
        evaluate_all=evaluate_all,
    )


@dataclass(frozen=True)
class RegistryEntry:
    kind: str  # "implicit" or "parametric"
    arg_names: tuple[str, ...]
    build: Callable


REGISTRY: dict[str, RegistryEntry] = {
    "circle": RegistryEntry(
        "implicit", ("x", "y", "r"), lambda x, y, r: circle_implicit((x, y), r)
    ),
    "ellipse": RegistryEntry(
        "implicit",
        ("x", "y", "a", "b", "rotation"),
        lambda x, y, a, b, rot: ellipse_implicit((x, y), a, b, rot),
    ),
    "ellipse3d": RegistryEntry(
        "parametric", ("xo", "yo", "r", "zl", "zh", "alpha_deg"), ellipse3d_parametric
    ),
    "lissajous3d": RegistryEntry(
        "parametric",
        ("cx", "cy", "cz", "ax", "ay", "az", "wx", "wy", "wz", "px", "py", "pz"),
        lambda *v: lissajous3d_parametric(v[0:3], v[3:6], v[6:9], v[9:12]),
    ),
    "circle2d_param": RegistryEntry(
        "parametric", ("xo", "yo", "r"), circle2d_parametric
    ),
}


def make_path(name: str, params: Sequence[float]):
    """Build a registered path from positional parameters."""
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown trajectory {name!r}; available: {', '.join(sorted(REGISTRY))}"
        ) from None
    if len(params) != len(entry.arg_names):
        raise ConfigError(
            f"trajectory {name!r} takes {len(entry.arg_names)} parameters "
            f"({', '.join(entry.arg_names)}), got {len(params)}"
        )
    return entry.build(*[float(v) for v in params])
