"""The beam electron as a classical field source.

The default field model is quasi-static: instantaneous Coulomb E and the
Biot-Savart B = v x E / c.  ``model="exact"`` uses the closed-form fields
of a charge in uniform motion, measured from its present position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import CGS, Frame, PhysicalConstants, cross, vec3
from .quadrature import IntegralResult, QuadratureSpec, integrate_1d, integrate_boxes

MODELS = ("quasi_static", "exact")


class CoincidentPointError(ValueError):
    """Field requested at (or within the cutoff of) the electron."""


@dataclass(frozen=True)
class ElectronState:
    charge: float
    position: tuple
    velocity: tuple
    constants: PhysicalConstants = CGS
    model: str = "quasi_static"
    cutoff: float = 1e-9  # cm

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in vec3(self.position)))
        object.__setattr__(self, "velocity", tuple(float(v) for v in vec3(self.velocity)))
        if not math.isfinite(float(self.charge)):
            raise ValueError("charge must be finite")
        if self.model not in MODELS:
            raise ValueError(f"unknown field model {self.model!r}; expected one of {MODELS}")
        speed = math.sqrt(sum(v * v for v in self.velocity))
        if not speed < self.constants.c:
            raise ValueError(f"electron speed {speed:.6e} must be below c = {self.constants.c:.6e}")

    @property
    def r(self) -> np.ndarray:
        return np.array(self.position)

    @property
    def v(self) -> np.ndarray:
        return np.array(self.velocity)

    @property
    def beta(self) -> float:
        return float(np.linalg.norm(self.v)) / self.constants.c

    def _separation(self, r):
        sep = np.asarray(r, dtype=np.float64) - self.r
        dist = np.sqrt(np.sum(sep * sep, axis=-1))
        if np.any(dist <= self.cutoff):
            raise CoincidentPointError("field point coincides with the electron")
        return sep, dist

    def _boost(self, sep, dist):
        """(1 - beta^2 sin^2 psi) at each separation (1 in quasi-static mode)."""
        if self.model == "quasi_static":
            return None
        c = self.constants.c
        vxr = cross(self.v, sep)
        return 1.0 - np.sum(vxr * vxr, axis=-1) / (c * c * dist * dist)

    def e_field(self, r) -> np.ndarray:
        sep, dist = self._separation(r)
        scale = self.charge / dist**3
        boost = self._boost(sep, dist)
        if boost is not None:
            scale = scale * (1.0 - self.beta**2) / boost**1.5
        return sep * scale[..., None]

    def b_field(self, r) -> np.ndarray:
        return cross(self.v, self.e_field(r)) / self.constants.c

    def a_field(self, r) -> np.ndarray:
        sep, dist = self._separation(r)
        pot = self.charge / dist
        boost = self._boost(sep, dist)
        if boost is not None:
            pot = pot / np.sqrt(boost)
        return pot[..., None] * (self.v / self.constants.c)


def electron_e_field(state: ElectronState, r) -> np.ndarray:
    """Electric field (statvolt/cm) of the electron at point(s) ``r``."""
    return state.e_field(r)


def electron_b_field(state: ElectronState, r) -> np.ndarray:
    """Magnetic field (gauss) of the electron at point(s) ``r``."""
    return state.b_field(r)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Classical path of the electron over ``[t0, t1]``.

    ``kind`` is ``"straight"``, ``"arc"`` or ``"polyline"``.  For a polyline
    the position is continuous but the velocity is taken from the segment
    containing t (right-continuous at the knots).
    """

    kind: str
    charge: float
    t0: float
    t1: float
    start: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)
    radius: float = 0.0
    angular_velocity: float = 0.0
    phase: float = 0.0
    waypoints: tuple = ()
    times: tuple = ()
    constants: PhysicalConstants = CGS
    model: str = "quasi_static"

    def __post_init__(self):
        if self.kind not in ("straight", "arc", "polyline"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if not self.t1 >= self.t0:
            raise ValueError("trajectory requires t1 >= t0")
        if self.kind == "polyline":
            if len(self.waypoints) < 2 or len(self.waypoints) != len(self.times):
                raise ValueError("polyline needs >= 2 waypoints with matching times")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ValueError("polyline times must be strictly increasing")
        speed = self.max_speed()
        if not speed < self.constants.c:
            raise ValueError("trajectory speed must stay below c")

    def max_speed(self) -> float:
        if self.kind == "straight":
            return float(np.linalg.norm(self.velocity))
        if self.kind == "arc":
            return abs(self.radius * self.angular_velocity)
        pts = np.array(self.waypoints, dtype=float)
        dt = np.diff(np.array(self.times, dtype=float))
        return float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1) / dt))

    def kinematics(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if not (self.t0 <= t <= self.t1):
            raise ValueError(f"time {t} outside trajectory domain [{self.t0}, {self.t1}]")
        if self.kind == "straight":
            v = np.array(self.velocity, dtype=float)
            return np.array(self.start, dtype=float) + v * t, v
        if self.kind == "arc":
            frame = Frame(self.center, self.axis)
            e1, e2, _ = frame.basis
            ang = self.phase + self.angular_velocity * t
            pos = frame.origin + self.radius * (math.cos(ang) * e1 + math.sin(ang) * e2)
            vel = self.radius * self.angular_velocity * (-math.sin(ang) * e1 + math.cos(ang) * e2)
            return pos, vel
        times = np.array(self.times, dtype=float)
        pts = np.array(self.waypoints, dtype=float)
        t = min(max(t, times[0]), times[-1])
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        vel = (pts[k + 1] - pts[k]) / (times[k + 1] - times[k])
        return pts[k] + vel * (t - times[k]), vel

    def state(self, t: float) -> ElectronState:
        pos, vel = self.kinematics(t)
        return ElectronState(self.charge, tuple(pos), tuple(vel), self.constants, self.model)


def flyby(
    impact_parameter: float,
    speed: float,
    charge: float,
    t0: float,
    t1: float,
    z: float = 0.0,
    constants: PhysicalConstants = CGS,
    model: str = "quasi_static",
) -> Trajectory:
    """Straight line along +x at y = impact_parameter; closest approach at t = 0."""
    return Trajectory(
        "straight",
        charge,
        t0,
        t1,
        start=(0.0, float(impact_parameter), float(z)),
        velocity=(float(speed), 0.0, 0.0),
        constants=constants,
        model=model,
    )


# ---------------------------------------------------------------------------
# linked flux
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleLoop:
    radius: float
    center: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("loop radius must be finite and > 0")

    @property
    def frame(self) -> Frame:
        return Frame(self.center, self.normal)


def _loop_points(loop: CircleLoop, phi):
    frame = loop.frame
    e1, e2, _ = frame.basis
    pts = frame.origin + loop.radius * (np.cos(phi)[..., None] * e1 + np.sin(phi)[..., None] * e2)
    tangent = loop.radius * (-np.sin(phi)[..., None] * e1 + np.cos(phi)[..., None] * e2)
    return pts, tangent


def electron_flux_through_loop(
    state: ElectronState,
    loop: CircleLoop,
    spec: QuadratureSpec | None = None,
    method: str = "disc",
) -> IntegralResult:
    """Flux of B_e through the flat disc spanning ``loop`` (gauss cm^2).

    ``method="disc"`` integrates B_e over the disc; ``method="line"`` uses the
    circulation of the electron's vector potential around the rim.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-300)
    if not any(state.velocity):
        return IntegralResult(0.0, 0.0, 0, True)
    frame = loop.frame
    loc = frame.to_local(state.r)
    phi_e = math.atan2(loc[1], loc[0]) % (2.0 * math.pi)
    phi_breaks = sorted({0.0, 2.0 * math.pi, phi_e, (phi_e + math.pi) % (2.0 * math.pi)})
    if method == "line":

        def integrand(phi):
            pts, tangent = _loop_points(loop, phi)
            return np.sum(state.a_field(pts) * tangent, axis=-1)

        return integrate_1d(integrand, 0.0, 2.0 * math.pi, spec, phi_breaks[1:-1])
    if method != "disc":
        raise ValueError("method must be 'disc' or 'line'")
    normal = frame.axis
    rho_e = math.hypot(loc[0], loc[1])
    rho_breaks = [0.0, loop.radius] + ([rho_e] if 0 < rho_e < loop.radius else [])

    def func(axes):
        rho, phi = axes
        r = rho[:, None, None]
        ph = phi[None, :, None]
        e1, e2, _ = frame.basis
        pts = frame.origin + r * (np.cos(ph) * e1 + np.sin(ph) * e2)
        bn = np.sum(state.b_field(pts) * normal, axis=-1)
        return bn * rho[:, None]

    (res,) = integrate_boxes(func, [rho_breaks, phi_breaks], spec, (1.0, loop.radius))
    return res


def linked_flux(
    state: ElectronState,
    radius: float,
    z_lo: float,
    z_hi: float,
    turns_per_cm: float,
    frame: Frame | None = None,
    spec: QuadratureSpec | None = None,
) -> IntegralResult:
    """Electron flux summed over the turns of a coaxial winding.

    Computes n * integral over z of the A_e circulation around the turn at
    height z, for turns of ``radius`` spanning local z in [z_lo, z_hi].

    The circulation of A_e mostly cancels for a distant electron, so the
    tolerance is taken relative to an upper bound on the integral of |A_e . dl|.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-300)
    frame = frame or Frame()
    if not any(state.velocity):
        return IntegralResult(0.0, 0.0, 0, True)
    loc = frame.to_local(state.r)
    phi_e = math.atan2(loc[1], loc[0]) % (2.0 * math.pi)
    phib = sorted({0.0, 2.0 * math.pi, phi_e, (phi_e + math.pi) % (2.0 * math.pi)})
    rho_e = math.hypot(loc[0], loc[1])
    gap = max(abs(rho_e - radius), 1e-3 * radius)
    gamma = 1.0 / math.sqrt(1.0 - state.beta**2)
    bound = (
        gamma * abs(state.charge) * float(np.linalg.norm(state.v)) / state.constants.c * 2.0 * math.pi * radius
        * (math.asinh((z_hi - loc[2]) / gap) - math.asinh((z_lo - loc[2]) / gap))
    )
    spec = replace(spec, abs_tol=max(spec.abs_tol, spec.rel_tol * bound))
    zb = [z_lo, z_hi] + [
        loc[2] + s * gap * 2.0**k for k in range(0, 12) for s in (-1.0, 1.0) if z_lo < loc[2] + s * gap * 2.0**k < z_hi
    ]
    if z_lo < loc[2] < z_hi:
        zb.append(loc[2])
    e1, e2, _ = frame.basis

    def func(axes):
        phi, z = axes
        ph = phi[:, None, None]
        pts = frame.origin + radius * (np.cos(ph) * e1 + np.sin(ph) * e2) + z[None, :, None] * frame.axis
        tangent = radius * (-np.sin(ph) * e1 + np.cos(ph) * e2)
        return np.sum(state.a_field(pts) * tangent, axis=-1)

    (res,) = integrate_boxes(func, [phib, zb], spec, (radius, 1.0))
    return IntegralResult(turns_per_cm * res.value, turns_per_cm * res.error_estimate, res.evaluations, res.converged)
