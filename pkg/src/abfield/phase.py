"""Aharonov-Bohm phases of beam paths around a flux-bearing source.

A path's phase is (e / hbar c) times the line integral of the vector
potential along it.  Two beams sharing endpoints differ in phase by
(e / hbar c) times the flux they enclose, which is what shifts the
interference pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import CGS, PhysicalConstants, vec3
from .quadrature import QuadratureSpec, integrate_1d

PHASE_SPEC = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300, max_subdivisions=30)
# a central-difference gradient carries ~1e-12 relative rounding noise
GAUGED_SPEC = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300, max_subdivisions=30)
_SCALE_NODES = (np.arange(16) + 0.5) / 16.0


class PathError(ValueError):
    """Invalid beam path: degenerate, mismatched endpoints or crossing the flux."""


@dataclass(frozen=True)
class BeamPath:
    """Polyline from the beam origin to a screen point."""

    points: tuple
    index: int = 1

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in vec3(p)) for p in self.points)
        if len(pts) < 2:
            raise PathError("a beam path needs at least two points")
        if self.index not in (1, 2):
            raise PathError("beam index must be 1 or 2")
        object.__setattr__(self, "points", pts)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    @property
    def origin(self) -> np.ndarray:
        return self.array[0]

    @property
    def end(self) -> np.ndarray:
        return self.array[-1]

    def reversed(self) -> "BeamPath":
        return BeamPath(self.points[::-1], self.index)


def _base(potential):
    return getattr(potential, "base", potential)


def _local_segments(path: BeamPath, source):
    frame = _base(source).frame
    loc = frame.to_local(path.array)
    return loc[:-1], loc[1:]


def clearance(source, path: BeamPath) -> float:
    """Smallest distance (cm) from the path to the flux-bearing cylinder wall.

    Negative when the path enters the cylinder.  For a finite source only the
    parts of the path within the source's axial extent count.
    """
    src = _base(source)
    a = src.radius
    best = math.inf
    for p0, p1 in zip(*_local_segments(path, src)):
        d = p1 - p0
        t_lo, t_hi = 0.0, 1.0
        if not src.ideal_infinite:
            h = src.half_length
            if d[2] == 0.0:
                if abs(p0[2]) > h:
                    continue
            else:
                ta, tb = sorted(((-h - p0[2]) / d[2], (h - p0[2]) / d[2]))
                t_lo, t_hi = max(t_lo, ta), min(t_hi, tb)
                if t_lo > t_hi:
                    continue
        dd = d[0] ** 2 + d[1] ** 2
        t_star = -(p0[0] * d[0] + p0[1] * d[1]) / dd if dd > 0 else t_lo
        t = min(max(t_star, t_lo), t_hi)
        rho = math.hypot(p0[0] + t * d[0], p0[1] + t * d[1])
        best = min(best, rho - a)
    return best


def winding(source, path: BeamPath) -> float:
    """Summed signed azimuthal increments about the source axis, in turns."""
    total = 0.0
    for p0, p1 in zip(*_local_segments(path, _base(source))):
        cross_z = p0[0] * p1[1] - p0[1] * p1[0]
        dot_xy = p0[0] * p1[0] + p0[1] * p1[1]
        total += math.atan2(cross_z, dot_xy)
    return total / (2.0 * math.pi)


def _validate(source, path: BeamPath):
    gap = clearance(source, path)
    if not gap > 0.0:
        raise PathError(f"beam path {path.index} enters the flux-bearing cylinder (clearance {gap:.3e} cm)")


def line_integral(potential, path: BeamPath, spec: QuadratureSpec | None = None) -> float:
    """Integral of A . dl along ``path`` (gauss cm^2), adaptive per segment."""
    spec = spec or (GAUGED_SPEC if isinstance(potential, GaugedPotential) else PHASE_SPEC)
    src = _base(potential)
    frame = src.frame
    pts = path.array
    total = []
    for p0, p1 in zip(pts[:-1], pts[1:]):
        d = p1 - p0
        l0, l1 = frame.to_local(p0), frame.to_local(p1)
        ld = l1 - l0
        dd = ld[0] ** 2 + ld[1] ** 2
        brk = []
        if dd > 0:
            t_star = -(l0[0] * ld[0] + l0[1] * ld[1]) / dd
            if 0.0 < t_star < 1.0:
                brk.append(t_star)

        def integrand(t, p0=p0, d=d):
            r = p0[None, :] + t[:, None] * d[None, :]
            return potential.a0(r) @ d

        # a segment whose A . dl nearly cancels converges against |A . dl|
        scale = float(np.mean(np.abs(integrand(_SCALE_NODES))))
        seg_spec = replace(spec, abs_tol=max(spec.abs_tol, spec.rel_tol * scale))
        res = integrate_1d(integrand, 0.0, 1.0, seg_spec, brk).require("path phase")
        total.append(res.value)
    return math.fsum(total)


def path_phase(source, path: BeamPath, constants: PhysicalConstants | None = None, spec: QuadratureSpec | None = None) -> float:
    """Phase (rad) acquired along ``path``: (e / hbar c) * integral of A0 . dl."""
    constants = constants or _base(source).constants
    _validate(source, path)
    return constants.phase_per_flux * line_integral(source, path, spec)


@dataclass(frozen=True)
class PhaseResult:
    phi0: float
    phi_of_F: float
    slope: float  # rad per gauss cm^2
    winding: float

    @property
    def shift(self) -> float:
        return self.phi_of_F - self.phi0


def relative_phase(
    source,
    path1: BeamPath,
    path2: BeamPath,
    phi0: float = 0.0,
    constants: PhysicalConstants | None = None,
    spec: QuadratureSpec | None = None,
) -> PhaseResult:
    """Phase of beam 1 relative to beam 2 at their common screen point.

    A zero winding of path1 followed by reversed path2 is reported in the
    result rather than raised; the phase is then flux independent.
    """
    constants = constants or _base(source).constants
    scale = max(float(np.max(np.abs(path1.array))), float(np.max(np.abs(path2.array))), 1e-300)
    tol = 1e-12 * scale
    if np.max(np.abs(path1.origin - path2.origin)) > tol or np.max(np.abs(path1.end - path2.end)) > tol:
        raise PathError("beam paths must share their origin and screen point")
    diff = path_phase(source, path1, constants, spec) - path_phase(source, path2, constants, spec)
    turns = winding(source, path1) - winding(source, path2)
    return PhaseResult(float(phi0), float(phi0) + diff, constants.phase_per_flux, round(turns, 9))


def enclosed_flux(source, path1: BeamPath, path2: BeamPath, spec: QuadratureSpec | None = None) -> float:
    """Circulation of A0 around path1 followed by reversed path2 (gauss cm^2)."""
    _validate(source, path1)
    _validate(source, path2)
    return line_integral(source, path1, spec) - line_integral(source, path2, spec)


def phase_sweep(
    source,
    path1: BeamPath,
    path2: BeamPath,
    fluxes: Sequence[float],
    phi0: float = 0.0,
    constants: PhysicalConstants | None = None,
) -> list[tuple[float, float]]:
    """(F, Phi(F)) for the source rescaled to each total flux in ``fluxes``."""
    from .sources import flux as source_flux

    base = source_flux(source)
    if base == 0.0:
        raise ValueError("source carries no flux to rescale")
    out = []
    for target in fluxes:
        scaled = source.scaled(float(target) / base)
        out.append((float(target), relative_phase(scaled, path1, path2, phi0, constants).phi_of_F))
    return out


# ---------------------------------------------------------------------------
# gauge transformations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaugedPotential:
    """A0 + grad(chi), with the gradient taken by central differences."""

    base: object
    chi: Callable[[np.ndarray], np.ndarray]
    step: float = 1e-4  # cm

    def gradient(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        h = self.step
        grads = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            grads.append((np.asarray(self.chi(r + e)) - np.asarray(self.chi(r - e))) / (2.0 * h))
        return np.stack(grads, axis=-1)

    def a0(self, r) -> np.ndarray:
        return self.base.a0(r) + self.gradient(r)

    def b0(self, r) -> np.ndarray:
        return self.base.b0(r)

    def scaled(self, factor: float) -> "GaugedPotential":
        return GaugedPotential(self.base.scaled(factor), self.chi, self.step)


def gauge_shift(source_potential, chi: Callable[[np.ndarray], np.ndarray], step: float = 1e-4) -> GaugedPotential:
    """Apply A -> A + grad(chi) to every later phase evaluation."""
    if not (math.isfinite(step) and step > 0):
        raise ValueError("gradient step must be finite and > 0")
    return GaugedPotential(source_potential, chi, step)


# ---------------------------------------------------------------------------
# interference pattern
# ---------------------------------------------------------------------------


def fringe_pattern(phi: float, spacing: float, x_min: float, x_max: float, n: int) -> list[tuple[float, float]]:
    """Two-beam intensity 1 + cos(2 pi x / spacing + phi) on ``n`` screen points."""
    if not (math.isfinite(spacing) and spacing > 0):
        raise ValueError("fringe spacing must be finite and > 0")
    if int(n) < 2:
        raise ValueError("fringe pattern needs n >= 2")
    xs = np.linspace(float(x_min), float(x_max), int(n))
    vals = 1.0 + np.cos(2.0 * np.pi * xs / spacing + float(phi))
    return [(float(x), float(v)) for x, v in zip(xs, vals)]


def standard_paths(radius: float, z: float = 0.0, screen_angle: float = 0.0, sides: int = 16) -> tuple[BeamPath, BeamPath]:
    """Two polygonal beams from (-radius, 0, z) around either side of the axis.

    Beam 1 passes on -y, beam 2 on +y; both end at the screen point at
    ``screen_angle`` (measured from +x, |angle| < pi/2) on the same circle.
    Their difference winds once counter-clockwise around the z axis.
    """
    start = math.pi
    upper = np.linspace(start, screen_angle, sides + 1)
    lower = np.linspace(-start, screen_angle, sides + 1)
    # polygon vertices sit outside the circle so chords keep the clearance
    scale = radius / math.cos(0.5 * abs(upper[1] - upper[0]))

    def build(angles, index):
        pts = [(radius * math.cos(angles[0]), radius * math.sin(angles[0]), z)]
        for a in angles[1:-1]:
            pts.append((scale * math.cos(a), scale * math.sin(a), z))
        pts.append((radius * math.cos(angles[-1]), radius * math.sin(angles[-1]), z))
        return BeamPath(tuple(pts), index)

    p1 = build(lower, 1)
    p2 = build(upper, 2)
    # identical start points (sin(pi) and sin(-pi) differ in the last bit)
    return p1, BeamPath((p1.points[0],) + p2.points[1:], 2)
