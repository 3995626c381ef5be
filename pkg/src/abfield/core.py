"""Vectors, physical constants, and the geometric regions shared by every module.

All quantities are Gaussian CGS.  Vectors are plain ``numpy`` arrays whose
last axis has length 3; :func:`vec3` is the validating constructor for a
single point or field value.

Both supported regions (finite cylinder, torus) are solids of revolution, so
they are described by a *meridian map* from a 2-D parameter box onto the
(rho, z) half plane of the region's local frame.  The quadrature module only
needs that map plus the azimuthal angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Vec3 = np.ndarray


class GeometryError(ValueError):
    """Raised for degenerate or non-finite geometric input."""


def vec3(x, y=None, z=None) -> Vec3:
    """Return a read-only float64 3-vector, rejecting NaN/Inf.

    Accepts either three scalars or one length-3 sequence.
    """
    if y is None and z is None:
        arr = np.array(x, dtype=np.float64).reshape(-1)
    else:
        arr = np.array([x, y, z], dtype=np.float64)
    if arr.shape != (3,):
        raise GeometryError(f"expected 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"non-finite vector component in {arr!r}")
    arr.setflags(write=False)
    return arr


def add(a: Vec3, b: Vec3) -> Vec3:
    return np.add(a, b)


def scale(s: float, a: Vec3) -> Vec3:
    return np.multiply(s, a)


def dot(a: Vec3, b: Vec3):
    return np.sum(np.multiply(a, b), axis=-1)


def cross(a: Vec3, b: Vec3) -> Vec3:
    """Right-handed cross product along the last axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def norm(a: Vec3):
    # hypot avoids underflow of tiny components and overflow of huge ones
    a = np.asarray(a)
    return np.hypot(np.hypot(a[..., 0], a[..., 1]), a[..., 2])


# ---------------------------------------------------------------------------
# constants and unit systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhysicalConstants:
    """Speed of light, reduced Planck constant and elementary charge.

    Defaults are CODATA 2018 in Gaussian CGS (cm/s, erg s, statC).
    """

    c: float = 2.99792458e10
    hbar: float = 1.054571817e-27
    e_charge: float = 4.80320471e-10
    name: str = "cgs"

    def __post_init__(self):
        for key in ("c", "hbar", "e_charge"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"constant {key} must be finite and > 0, got {value}")

    @property
    def flux_quantum(self) -> float:
        """Flux change 2*pi*hbar*c/e that shifts the AB phase by 2*pi."""
        return 2.0 * math.pi * self.hbar * self.c / self.e_charge

    @property
    def phase_per_flux(self) -> float:
        return self.e_charge / (self.hbar * self.c)


CGS = PhysicalConstants()
NATURAL = PhysicalConstants(c=1.0, hbar=1.0, e_charge=1.0, name="natural")

PRESETS = {"cgs": CGS, "natural": NATURAL}


# Gaussian dimensions as (mass, length, time) exponents.
DIMENSIONS = {
    "length": (0.0, 1.0, 0.0),
    "time": (0.0, 0.0, 1.0),
    "mass": (1.0, 0.0, 0.0),
    "velocity": (0.0, 1.0, -1.0),
    "charge": (0.5, 1.5, -1.0),
    "current": (0.5, 1.5, -2.0),
    "surface_charge": (0.5, -0.5, -1.0),
    "field": (0.5, -0.5, -1.0),  # gauss == statvolt/cm
    "potential": (0.5, 0.5, -1.0),  # gauss cm
    "flux": (0.5, 1.5, -1.0),  # gauss cm^2
    "energy": (1.0, 2.0, -2.0),
    "power": (1.0, 2.0, -3.0),
    "action": (1.0, 2.0, -1.0),
    "inverse_length": (0.0, -1.0, 0.0),
    "inverse_time": (0.0, 0.0, -1.0),
    "inductance": (0.0, -1.0, 2.0),  # s^2/cm
    "dimensionless": (0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class UnitScale:
    """Rescaled Gaussian units in which c = hbar = 1 and lengths are in ``length_cm``.

    In such units the elementary charge is sqrt(alpha), not 1: with the
    fine-structure constant fixed, c = hbar = e = 1 is a different physical
    system rather than a change of units (see :data:`NATURAL`).
    """

    length_cm: float = 1.0
    constants: PhysicalConstants = CGS

    @property
    def base(self) -> tuple[float, float, float]:
        c, hbar = self.constants.c, self.constants.hbar
        time_s = self.length_cm / c
        mass_g = hbar / (self.length_cm * c)
        return mass_g, self.length_cm, time_s

    def factor(self, kind: str) -> float:
        """CGS value of one unit of ``kind`` in the rescaled system."""
        em, el, et = DIMENSIONS[kind]
        m0, l0, t0 = self.base
        return m0**em * l0**el * t0**et

    def to_scaled(self, value, kind: str):
        return np.divide(value, self.factor(kind))

    def to_cgs(self, value, kind: str):
        return np.multiply(value, self.factor(kind))

    def scaled_constants(self) -> PhysicalConstants:
        return PhysicalConstants(
            c=float(self.to_scaled(self.constants.c, "velocity")),
            hbar=float(self.to_scaled(self.constants.hbar, "action")),
            e_charge=float(self.to_scaled(self.constants.e_charge, "charge")),
            name="scaled",
        )


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


def _unit(direction, what: str) -> Vec3:
    d = vec3(direction)
    n = float(norm(d))
    if n == 0.0:
        raise GeometryError(f"{what} must be non-zero")
    return vec3(d / n)


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal frame (e1, e2, axis) anchored at ``origin``."""

    origin: Vec3 = field(default_factory=lambda: vec3(0, 0, 0))
    axis: Vec3 = field(default_factory=lambda: vec3(0, 0, 1))

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        object.__setattr__(self, "axis", _unit(self.axis, "axis_direction"))

    @property
    def basis(self) -> np.ndarray:
        """3x3 matrix whose rows are e1, e2, axis."""
        k = self.axis
        # e1 is the global x (or y) direction projected out of the axis; for
        # the default z axis this is the identity frame.
        trial = np.array([1.0, 0.0, 0.0]) if abs(k[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = trial - np.dot(trial, k) * k
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(k, e1)
        return np.stack([e1, e2, k])

    @property
    def is_standard(self) -> bool:
        return bool(np.all(self.origin == 0.0) and np.all(self.axis == np.array([0.0, 0.0, 1.0])))

    def to_local(self, r):
        r = np.asarray(r, dtype=np.float64)
        if self.is_standard:
            return r
        return (r - self.origin) @ self.basis.T

    def vector_to_global(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.is_standard:
            return v
        return v @ self.basis

    def point_to_global(self, r):
        if self.is_standard:
            return np.asarray(r, dtype=np.float64)
        return self.origin + self.vector_to_global(r)

    def same_as(self, other: "Frame", tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.origin, other.origin, rtol=0, atol=tol)
            and np.allclose(self.axis, other.axis, rtol=0, atol=tol)
        )


def cylindrical_to_cartesian(rho, phi, z):
    rho, phi, z = np.broadcast_arrays(rho, phi, z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def _positive(value, what: str) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise GeometryError(f"{what} must be finite and > 0, got {value}")
    return value


@dataclass(frozen=True)
class CylinderRegion:
    """Solid cylinder of given radius, |z_local| <= half_length."""

    radius: float
    half_length: float
    axis_origin: Vec3 = field(default_factory=lambda: vec3(0, 0, 0))
    axis_direction: Vec3 = field(default_factory=lambda: vec3(0, 0, 1))

    def __post_init__(self):
        object.__setattr__(self, "radius", _positive(self.radius, "radius"))
        object.__setattr__(self, "half_length", _positive(self.half_length, "half_length"))
        object.__setattr__(self, "axis_origin", vec3(self.axis_origin))
        object.__setattr__(self, "axis_direction", _unit(self.axis_direction, "axis_direction"))

    @property
    def frame(self) -> Frame:
        return Frame(self.axis_origin, self.axis_direction)

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2 * 2.0 * self.half_length

    # meridian parameters: p = rho in [0, R], q = z in [-H, H]
    @property
    def meridian_box(self) -> tuple[float, float, float, float]:
        return 0.0, self.radius, -self.half_length, self.half_length

    def meridian(self, p, q):
        """Map (p, q) to (rho, z, jacobian) with dV = jacobian dp dphi dq."""
        return p, q, p

    def contains(self, r) -> bool:
        loc = self.frame.to_local(r)
        return bool(math.hypot(loc[0], loc[1]) < self.radius and abs(loc[2]) < self.half_length)

    def surface(self) -> "OrientedSurface":
        return OrientedSurface(self)


@dataclass(frozen=True)
class TorusRegion:
    """Solid torus around ``axis_direction``; tube radius ``minor_radius``."""

    major_radius: float
    minor_radius: float
    center: Vec3 = field(default_factory=lambda: vec3(0, 0, 0))
    axis_direction: Vec3 = field(default_factory=lambda: vec3(0, 0, 1))

    def __post_init__(self):
        big = _positive(self.major_radius, "major_radius")
        small = _positive(self.minor_radius, "minor_radius")
        if not small < big:
            raise GeometryError("torus requires 0 < minor_radius < major_radius")
        object.__setattr__(self, "major_radius", big)
        object.__setattr__(self, "minor_radius", small)
        object.__setattr__(self, "center", vec3(self.center))
        object.__setattr__(self, "axis_direction", _unit(self.axis_direction, "axis_direction"))

    @property
    def frame(self) -> Frame:
        return Frame(self.center, self.axis_direction)

    @property
    def volume(self) -> float:
        return 2.0 * math.pi**2 * self.major_radius * self.minor_radius**2

    # meridian parameters: p = tube radius s in [0, r], q = poloidal angle
    @property
    def meridian_box(self) -> tuple[float, float, float, float]:
        return 0.0, self.minor_radius, 0.0, 2.0 * math.pi

    def meridian(self, p, q):
        rho = self.major_radius + p * np.cos(q)
        return rho, p * np.sin(q), p * rho

    def contains(self, r) -> bool:
        loc = self.frame.to_local(r)
        rho = math.hypot(loc[0], loc[1])
        return math.hypot(rho - self.major_radius, loc[2]) < self.minor_radius

    def surface(self) -> "OrientedSurface":
        return OrientedSurface(self)


class SurfaceParameterError(ValueError):
    pass


@dataclass(frozen=True)
class OrientedSurface:
    """Closed boundary of a region with inward-pointing area elements.

    The parametrization is (u, v) in [0, 1]^2 with azimuth phi = 2*pi*u.
    For a cylinder, v runs by arc length along the meridian: bottom cap from
    the axis out to the rim, the lateral wall upward, then the top cap back
    to the axis.  For a torus, v = theta / (2*pi) is the poloidal angle
    measured from the outer equator.
    """

    region: CylinderRegion | TorusRegion
    normal_orientation: str = "inward"

    def __post_init__(self):
        if self.normal_orientation != "inward":
            raise GeometryError("only inward-oriented surfaces are supported")

    @property
    def frame(self) -> Frame:
        return self.region.frame

    @property
    def v_breakpoints(self) -> tuple[float, ...]:
        """Values of v where the meridian has a corner."""
        if isinstance(self.region, CylinderRegion):
            R, H = self.region.radius, self.region.half_length
            total = 2.0 * R + 2.0 * H
            return (R / total, (R + 2.0 * H) / total)
        return ()

    def meridian(self, v):
        """Return (rho, z, n_rho, n_z, speed) along the meridian.

        (n_rho, n_z) is the unit inward normal in the meridian plane and
        ``speed`` is |d(rho, z)/dv|.
        """
        v = np.asarray(v, dtype=np.float64)
        reg = self.region
        if isinstance(reg, CylinderRegion):
            R, H = reg.radius, reg.half_length
            total = 2.0 * R + 2.0 * H
            s = v * total
            bottom = s <= R
            top = s >= R + 2.0 * H
            rho = np.where(bottom, s, np.where(top, total - s, R))
            z = np.where(bottom, -H, np.where(top, H, s - R - H))
            n_rho = np.where(bottom | top, 0.0, -1.0)
            n_z = np.where(bottom, 1.0, np.where(top, -1.0, 0.0))
            speed = np.full_like(v, total)
            return rho, z, n_rho, n_z, speed
        theta = 2.0 * np.pi * v
        ct, st = np.cos(theta), np.sin(theta)
        rho = reg.major_radius + reg.minor_radius * ct
        z = reg.minor_radius * st
        speed = np.full_like(v, 2.0 * np.pi * reg.minor_radius)
        return rho, z, -ct, -st, speed


def surface_sample(surface: OrientedSurface, u, v):
    """Point on ``surface`` and its inward area vector per unit (u, v).

    Returns ``(point, dsigma)`` in global coordinates.  ``dsigma`` is the
    inward unit normal times the Jacobian, so integrating it over the unit
    square gives the vector area.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    v_arr = np.asarray(v, dtype=np.float64)
    if np.any((u_arr < 0) | (u_arr > 1) | (v_arr < 0) | (v_arr > 1)) or not (
        np.all(np.isfinite(u_arr)) and np.all(np.isfinite(v_arr))
    ):
        raise SurfaceParameterError("surface parameters (u, v) must lie in [0, 1]^2")
    u_arr, v_arr = np.broadcast_arrays(u_arr, v_arr)
    rho, z, n_rho, n_z, speed = surface.meridian(v_arr)
    phi = 2.0 * np.pi * u_arr
    cphi, sphi = np.cos(phi), np.sin(phi)
    local = np.stack([rho * cphi, rho * sphi, z], axis=-1)
    jac = 2.0 * np.pi * rho * speed
    dsig = np.stack([n_rho * cphi, n_rho * sphi, n_z], axis=-1) * jac[..., None]
    frame = surface.frame
    return frame.point_to_global(local), frame.vector_to_global(dsig)
