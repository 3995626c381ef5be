"""Magnetic energy bookkeeping around a flux-bearing source and a passing electron.

Three families of results live here:

* the energy ledger, splitting (1/8pi) * integral of (B0 + Be)^2 over the region S
  into external, cross and self terms;
* the back-reaction of a resistanceless winding, which keeps its total
  flux linkage fixed and so changes its current by -linked_flux / (c L);
* the electromagnetic power flowing into S through its boundary, with and
  without the external field in the Poynting vector.

The baseline for every "change" is the electron at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import CylinderRegion, Frame, OrientedSurface, TorusRegion
from .electron import ElectronState, Trajectory, linked_flux
from .quadrature import (
    IntegralResult,
    QuadratureError,
    QuadratureSpec,
    ScalingFit,
    VolumeNodes,
    integrate_boxes,
    integrate_region,
    integrate_surface,
    power_law_fit,
)
from .sources import SheetSource, SolenoidSource, _winding, self_inductance

GEOMETRY_SPEC = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-300, max_subdivisions=20)


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyLedger:
    time: float
    term_external: float
    term_cross: float
    term_self: float
    total: float
    errors: tuple[float, float, float] = (0.0, 0.0, 0.0)
    converged: bool = True

    @classmethod
    def from_terms(cls, time, external, cross, self_term, errors=(0.0, 0.0, 0.0), converged=True):
        return cls(time, external, cross, self_term, external + cross + self_term, tuple(errors), converged)


@dataclass(frozen=True)
class BackReaction:
    delta_I: float
    delta_B0_inside: float
    delta_term_external: float
    linked_flux: float
    inductance: float
    conservation_residual: float
    applicable: bool = True
    converged: bool = True


@dataclass(frozen=True)
class PoyntingReport:
    R_full: float
    R_reduced: float
    cross_surface_term: float
    cross_surface_scale: float
    errors: tuple[float, float, float] = (0.0, 0.0, 0.0)
    converged: bool = True
    mode: str = "full"

    @property
    def rate(self) -> float:
        return self.R_full if self.mode == "full" else self.R_reduced


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A source, an electron trajectory and the region S around the source.

    S is coaxial with the source.  Its radius defaults to 1.001 a and its
    half-length to ``half_length_multiple`` source half-lengths.  For an
    ideal infinite source, the winding that takes part in the back-reaction
    is the part inside S.
    """

    source: SheetSource
    trajectory: Trajectory
    region_radius: float | None = None
    half_length_multiple: float = 5.0
    surface_kind: str = "cylinder"
    torus_major_radius: float | None = None
    torus_minor_radius: float | None = None
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    electron_cutoff: float | None = None

    @property
    def region(self) -> CylinderRegion:
        src = self.source
        radius = self.region_radius if self.region_radius is not None else 1.001 * src.radius
        return CylinderRegion(
            radius=radius,
            half_length=self.half_length_multiple * src.half_length,
            axis_origin=src.center,
            axis_direction=src.axis,
        )

    @property
    def torus(self) -> TorusRegion:
        src = self.source
        big = self.torus_major_radius or 2.0 * src.radius
        small = self.torus_minor_radius or 0.5 * src.radius
        return TorusRegion(big, small, center=src.center, axis_direction=src.axis)

    @property
    def surface(self) -> OrientedSurface:
        return OrientedSurface(self.torus if self.surface_kind == "torus" else self.region)

    def with_length(self, length: float) -> "Scenario":
        return replace(self, source=replace(self.source, length=length))

    def with_flux_factor(self, factor: float) -> "Scenario":
        return replace(self, source=self.source.scaled(factor))

    def state(self, t: float) -> ElectronState:
        return self.trajectory.state(t)


# ---------------------------------------------------------------------------
# field helpers
# ---------------------------------------------------------------------------


def _b0_on_nodes(source: SheetSource, rho, z, phi, frame: Frame, points=None):
    """Global B0 at volume/surface nodes given local (rho, z) and azimuth phi."""
    if frame.same_as(source.frame):
        rho2 = np.ascontiguousarray(np.broadcast_to(rho, np.broadcast_shapes(rho.shape, z.shape)))
        z2 = np.ascontiguousarray(np.broadcast_to(z, rho2.shape))
        br, bz, _ = _cached(source, rho2, z2)
        br = br.reshape(rho2.shape)
        bz = bz.reshape(rho2.shape)
        br, bz, cphi, sphi = np.broadcast_arrays(br, bz, np.cos(phi), np.sin(phi))
        local = np.stack([br * cphi, br * sphi, bz], axis=-1)
        return frame.vector_to_global(local)
    return source.b0(points)


def _cached(source: SheetSource, rho2, z2):
    key = ("pts", rho2.tobytes(), z2.tobytes())
    hit = source._cache.get(key)
    if hit is None:
        if len(source._cache) > 50_000:
            source._cache.clear()
        hit = source.fields_cyl(rho2.ravel(), z2.ravel())
        source._cache[key] = hit
    return hit


def _region_breaks(source: SheetSource, region, state: ElectronState | None):
    if not isinstance(region, CylinderRegion):
        return {}
    a, h = source.radius, source.half_length
    R, H = region.radius, region.half_length
    p_breaks = [a] if a < R else []
    p_breaks += [a * (1.0 - 2.0**-k) for k in (1, 3)]
    q_breaks = []
    if not source.ideal_infinite:
        for sgn in (-1.0, 1.0):
            q_breaks += [sgn * h + d * a for d in (-1.0, -0.125, 0.0, 0.125, 1.0)]
    if state is not None:
        loc = region.frame.to_local(state.r)
        ze = float(loc[2])
        gap = max(math.hypot(loc[0], loc[1]) - R, 0.25 * R)
        q_breaks.append(ze)
        q_breaks += [ze + s * gap * 4.0**k for k in range(0, 20) for s in (-1.0, 1.0) if gap * 4.0**k < 2 * H]
    else:
        q_breaks += list(np.linspace(-H, H, 9)[1:-1])
    return {
        "p_breaks": [p for p in p_breaks if 0 < p < R],
        "q_breaks": [q for q in q_breaks if -H < q < H],
    }


def _phi_breaks(region, state: ElectronState | None):
    base = [0.5 * math.pi, math.pi, 1.5 * math.pi]
    if state is None:
        return base
    loc = region.frame.to_local(state.r)
    phi_e = math.atan2(loc[1], loc[0]) % (2.0 * math.pi)
    extra = [(phi_e + d) % (2.0 * math.pi) for d in (0.0, math.pi, 0.25, -0.25)]
    return sorted(set(base + extra))


# ---------------------------------------------------------------------------
# energy ledger
# ---------------------------------------------------------------------------


def _electron_b(state: ElectronState, pts, cutoff):
    if cutoff is None:
        return state.b_field(pts)
    sep = pts - state.r
    dist = np.sqrt(np.sum(sep * sep, axis=-1))
    safe = np.where(dist[..., None] > cutoff, pts, state.r + cutoff * 2.0)
    b = state.b_field(safe)
    return np.where(dist[..., None] > cutoff, b, 0.0)


def _cutoff_for(region, state, source, cutoff):
    if region.contains(state.r):
        return cutoff if cutoff is not None else 1e-3 * source.radius
    return None


def energy_ledger(
    source: SheetSource,
    state: ElectronState,
    region: CylinderRegion | TorusRegion,
    spec: QuadratureSpec | None = None,
    *,
    time: float = 0.0,
    delta_current_fraction: float = 0.0,
    cutoff: float | None = None,
) -> EnergyLedger:
    """External, cross and self magnetic energies inside ``region`` (erg).

    ``delta_current_fraction`` (dI / I from a back-reaction) rescales B0.
    The external term then includes the change, computed as
    (2x + x^2) times the unperturbed value so that tiny x is not lost to
    rounding.  When the electron is inside the region, a ball of radius
    ``cutoff`` (default 1e-3 a) around it is excluded.
    """
    spec = spec or QuadratureSpec()
    frame = region.frame
    cut = _cutoff_for(region, state, source, cutoff)

    def g(nodes: VolumeNodes):
        pts = nodes.points()
        b0 = _b0_on_nodes(source, nodes.rho, nodes.z, nodes.phi, frame, pts)
        be = _electron_b(state, pts, cut)
        b0 = np.broadcast_to(b0, be.shape)
        inv = 1.0 / (8.0 * math.pi)
        return np.stack(
            [
                inv * np.sum(b0 * b0, axis=-1),
                inv * 2.0 * np.sum(b0 * be, axis=-1),
                inv * np.sum(be * be, axis=-1),
            ]
        )

    results = integrate_region(
        g, region, spec, phi_breaks=_phi_breaks(region, state), **_region_breaks(source, region, state)
    )
    ext, cross, self_term = results
    x = float(delta_current_fraction)
    external = ext.value + ext.value * x * (2.0 + x)
    cross_value = cross.value * (1.0 + x)
    return EnergyLedger.from_terms(
        time,
        external,
        cross_value,
        self_term.value,
        errors=(ext.error_estimate, cross.error_estimate, self_term.error_estimate),
        converged=all(r.converged for r in results),
    )


def cross_energy(
    source: SheetSource,
    state: ElectronState,
    region: CylinderRegion,
    spec: QuadratureSpec | None = None,
    cutoff: float | None = None,
) -> IntegralResult:
    """(1/4pi) * integral over ``region`` of B0 . Be, the ledger's cross term."""
    spec = spec or QuadratureSpec()
    frame = region.frame
    cut = _cutoff_for(region, state, source, cutoff)

    def g(nodes: VolumeNodes):
        pts = nodes.points()
        b0 = _b0_on_nodes(source, nodes.rho, nodes.z, nodes.phi, frame, pts)
        be = _electron_b(state, pts, cut)
        return np.sum(np.broadcast_to(b0, be.shape) * be, axis=-1) / (4.0 * math.pi)

    (res,) = integrate_region(
        g, region, spec, phi_breaks=_phi_breaks(region, state), **_region_breaks(source, region, state)
    )
    return res


def external_energy(source: SheetSource, region: CylinderRegion, spec: QuadratureSpec | None = None) -> IntegralResult:
    """(1/8pi) * integral of B0^2 over ``region``, using axisymmetry (erg)."""
    spec = spec or GEOMETRY_SPEC
    key = ("W_S", region.radius, region.half_length, spec)
    hit = source._cache.get(key)
    if hit is not None:
        return hit
    if source.ideal_infinite:
        R = min(region.radius, source.radius)
        value = source.b_inside**2 / (8.0 * math.pi) * math.pi * R * R * 2.0 * region.half_length
        res = IntegralResult(value, 0.0, 0, True)
    else:
        breaks = _region_breaks(source, region, None)
        pb = [0.0, region.radius] + breaks["p_breaks"]
        qb = [0.0, region.half_length] + [q for q in breaks["q_breaks"] if q > 0]

        def func(axes):
            rho, z = axes
            br, bz, _ = source.fields_grid(rho, z)
            return 2.0 * 2.0 * math.pi * rho[:, None] * (br * br + bz * bz) / (8.0 * math.pi)

        (res,) = integrate_boxes(func, [pb, qb], spec, (1.0, 1.0))
    source._cache[key] = res
    return res


def mutual_energy_oracle(source, state: ElectronState) -> float:
    """(e/c) v . A0(r_e): the all-space mutual energy of a point charge and B0."""
    a0 = source.a0(state.r)
    return float(state.charge / state.constants.c * np.dot(state.v, a0))


def mutual_energy_all_space(
    source: SheetSource,
    state: ElectronState,
    spec: QuadratureSpec | None = None,
    outer: float | None = None,
    cutoff: float | None = None,
) -> IntegralResult:
    """(1/4pi) * integral of B0 . Be over a coaxial cylinder of radius/half-length ``outer``.

    The electron lies inside, so a small ball around it is excluded.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-4, abs_tol=1e-300, max_subdivisions=24)
    outer = outer or 4.0 * source.length
    big = CylinderRegion(outer, outer, axis_origin=source.center, axis_direction=source.axis)
    loc = big.frame.to_local(state.r)
    rho_e = math.hypot(loc[0], loc[1])
    cut = cutoff if cutoff is not None else 1e-3 * source.radius
    breaks = _region_breaks(source, CylinderRegion(source.radius * 1.001, outer), state)
    pb = breaks["p_breaks"] + [rho_e - cut * 2.0**k for k in range(0, 12)] + [rho_e + cut * 2.0**k for k in range(0, 30)]
    pb = [p for p in pb if 0 < p < outer]
    frame = big.frame

    def g(nodes: VolumeNodes):
        pts = nodes.points()
        b0 = _b0_on_nodes(source, nodes.rho, nodes.z, nodes.phi, frame, pts)
        be = _electron_b(state, pts, cut)
        return np.sum(np.broadcast_to(b0, be.shape) * be, axis=-1) / (4.0 * math.pi)

    (res,) = integrate_region(g, big, spec, p_breaks=pb, q_breaks=breaks["q_breaks"], phi_breaks=_phi_breaks(big, state))
    return res


# ---------------------------------------------------------------------------
# back-reaction
# ---------------------------------------------------------------------------


def _winding_span(source: SheetSource, region: CylinderRegion | None) -> tuple[float, float]:
    if source.ideal_infinite and region is not None:
        return -region.half_length, region.half_length
    return -source.half_length, source.half_length


def _circuit_source(source: SheetSource, region: CylinderRegion | None) -> SheetSource:
    """The winding seen by the flux-conservation circuit."""
    lo, hi = _winding_span(source, region)
    if source.ideal_infinite and (hi - lo) != source.length:
        return replace(source, length=hi - lo)
    return source


def inductance(source: SheetSource, spec: QuadratureSpec | None = None):
    """Self-inductance of the winding (cached per geometry)."""
    key = ("L", spec)
    hit = source._cache.get(key)
    if hit is None:
        hit = self_inductance(source, spec)
        source._cache[key] = hit
    return hit


def self_linkage(source: SheetSource, spec: QuadratureSpec | None = None) -> IntegralResult:
    """Flux linkage of the winding with its own field, n * sum over turns of disc flux."""
    spec = spec or GEOMETRY_SPEC
    key = ("linkage", spec)
    hit = source._cache.get(key)
    if hit is not None:
        return hit
    n, _ = _winding(source)
    a, h = source.radius, source.half_length
    if source.ideal_infinite:
        res = IntegralResult(n * math.pi * a * a * source.b_inside * source.length, 0.0, 0, True)
    else:
        pb = [0.0, a] + [a * (1.0 - 2.0**-k) for k in (1, 3)]
        qb = [0.0, h] + [h - a * 2.0**-k for k in (-1, 1, 3) if 0 < h - a * 2.0**-k < h]
        qb += list(np.linspace(0.0, h, 5)[1:-1])

        def func(axes):
            rho, z = axes
            _, bz, _ = source.fields_grid(rho, z)
            return 2.0 * n * 2.0 * math.pi * rho[:, None] * bz

        (res,) = integrate_boxes(func, [pb, qb], spec, (1.0, 1.0))
    source._cache[key] = res
    return res


def back_reaction(
    source: SheetSource,
    state: ElectronState,
    spec: QuadratureSpec | None = None,
    region: CylinderRegion | None = None,
) -> BackReaction:
    """Current change that keeps a resistanceless winding's flux linkage fixed.

    delta_I = -Lambda_e / (c L), with Lambda_e the electron's flux summed over
    the turns and L from the field self-energy.  The conservation residual
    re-derives the winding's own linkage change from its field and compares
    it with -Lambda_e.  Rotors and whiskers are treated through their
    equivalent winding and flagged ``applicable=False``.
    """
    spec = spec or QuadratureSpec()
    circuit = _circuit_source(source, region)
    n, current = _winding(circuit)
    c = circuit.constants.c
    lo, hi = _winding_span(source, region)
    lam = linked_flux(
        state,
        circuit.radius,
        lo,
        hi,
        n,
        frame=circuit.frame,
        spec=QuadratureSpec(rel_tol=min(spec.rel_tol, 1e-9), abs_tol=1e-300, max_subdivisions=30),
    )
    L = inductance(circuit)
    linkage = self_linkage(circuit if current != 0.0 else _unit_current(circuit))
    unit_current = current if current != 0.0 else 1.0
    delta_i = -lam.value / (c * L.value)
    own_change = linkage.value * delta_i / unit_current
    denom = abs(lam.value)
    residual = abs(own_change + lam.value) / denom if denom > 0 else 0.0
    if region is None:
        region = CylinderRegion(1.001 * source.radius, 5.0 * source.half_length, source.center, source.axis)
    if current != 0.0:
        w_s = external_energy(source, region)
        delta_ext = 2.0 * (delta_i / current) * w_s.value
    else:
        delta_ext = 0.0
        w_s = IntegralResult(0.0, 0.0, 0, True)
    return BackReaction(
        delta_I=delta_i,
        delta_B0_inside=4.0 * math.pi * n * delta_i / c,
        delta_term_external=delta_ext,
        linked_flux=lam.value,
        inductance=L.value,
        conservation_residual=residual,
        applicable=isinstance(source, SolenoidSource),
        converged=lam.converged and L.converged and linkage.converged and w_s.converged,
    )


def _unit_current(source: SheetSource) -> SheetSource:
    if isinstance(source, SolenoidSource):
        return replace(source, current=1.0)
    raise ValueError("back-reaction needs a non-zero source current")


# ---------------------------------------------------------------------------
# cancellation sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CancellationRow:
    length: float
    a_over_l: float
    residual_ratio: float
    max_delta_cross: float
    max_delta_sum: float
    delta_I: tuple[float, ...]
    converged: bool


def cancellation_row(scenario: Scenario, times: Sequence[float]) -> CancellationRow:
    """Largest |d(external + cross)| relative to largest |d cross| over ``times``."""
    source = scenario.source
    region = scenario.region
    spec = scenario.spec
    n, current = _winding(_circuit_source(source, region))
    w_s = external_energy(source, region)
    d_cross, d_sum, d_i = [], [], []
    ok = w_s.converged
    for t in times:
        state = scenario.state(t)
        cross = cross_energy(source, state, region, spec)
        br = back_reaction(source, state, spec, region)
        delta_ext = 2.0 * (br.delta_I / current) * w_s.value
        d_cross.append(cross.value)
        d_sum.append(cross.value + delta_ext)
        d_i.append(br.delta_I)
        ok = ok and cross.converged and br.converged
    max_cross = max(abs(v) for v in d_cross)
    max_sum = max(abs(v) for v in d_sum)
    ratio = max_sum / max_cross if max_cross > 0 else 0.0
    return CancellationRow(
        length=source.length,
        a_over_l=source.radius / source.length,
        residual_ratio=ratio,
        max_delta_cross=max_cross,
        max_delta_sum=max_sum,
        delta_I=tuple(d_i),
        converged=ok,
    )


def cancellation_table(scenario: Scenario, lengths: Sequence[float], times: Sequence[float]) -> list[CancellationRow]:
    return [cancellation_row(scenario.with_length(ell), times) for ell in lengths]


def cancellation_sweep(scenario: Scenario, lengths: Sequence[float], times: Sequence[float]) -> ScalingFit:
    """Fit the cancellation residual against a/l over a sweep of source lengths."""
    if len(lengths) < 3:
        raise ValueError("cancellation_sweep needs at least 3 lengths")
    rows = cancellation_table(scenario, lengths, times)
    return power_law_fit([(r.a_over_l, r.residual_ratio) for r in rows])


# ---------------------------------------------------------------------------
# Poynting influx
# ---------------------------------------------------------------------------


def _poynting_components(source, state, surface: OrientedSurface, spec, scale_pass: bool):
    frame = surface.frame
    pref = state.constants.c / (4.0 * math.pi)

    def g(nodes):
        e = state.e_field(nodes.points)
        be = state.b_field(nodes.points)
        b0 = _b0_on_nodes(source, nodes.rho, nodes.z, 2.0 * np.pi * nodes.u, frame, nodes.points)
        b0 = np.broadcast_to(b0, e.shape)
        ds = nodes.dsigma
        reduced = pref * np.sum(np.cross(e, be) * ds, axis=-1)
        cross = pref * np.sum(np.cross(e, b0) * ds, axis=-1)
        full = pref * np.sum(np.cross(e, b0 + be) * ds, axis=-1)
        if scale_pass:
            return np.stack([np.abs(full), np.abs(reduced), np.abs(cross)])
        return np.stack([full, reduced, cross])

    loc = frame.to_local(state.r)
    u_e = (math.atan2(loc[1], loc[0]) / (2.0 * math.pi)) % 1.0
    u_breaks = sorted({0.25, 0.5, 0.75, u_e, (u_e + 0.5) % 1.0, (u_e + 0.05) % 1.0, (u_e - 0.05) % 1.0})
    v_breaks = _surface_v_breaks(source, surface, loc)
    return integrate_surface(g, surface, spec, u_breaks=u_breaks, v_breaks=v_breaks)


def _surface_v_breaks(source, surface: OrientedSurface, loc) -> list[float]:
    region = surface.region
    if not isinstance(region, CylinderRegion):
        return [0.125 * k for k in range(1, 8)]
    R, H = region.radius, region.half_length
    total = 2.0 * R + 2.0 * H

    def v_of(z):
        return (R + H + z) / total

    zs = [float(loc[2])] + [float(loc[2]) + s * R * 2.0**k for k in range(0, 40) for s in (-1, 1) if R * 2.0**k < 2 * H]
    if not source.ideal_infinite:
        h, a = source.half_length, source.radius
        zs += [s * h + d * a * 2.0**-k for s in (-1, 1) for k in range(0, 12) for d in (-1, 1)] + [-h, h]
    zs += list(np.linspace(-H, H, 17)[1:-1])
    return [v_of(z) for z in zs if -H < z < H]


def poynting_rate(
    source: SheetSource,
    state: ElectronState,
    surface: OrientedSurface,
    spec: QuadratureSpec | None = None,
    mode: str = "full",
) -> PoyntingReport:
    """Rate (erg/s) at which field energy enters the region bounded by ``surface``.

    ``R_full`` uses B0 + Be in the Poynting vector, ``R_reduced`` only Be, and
    ``cross_surface_term`` is the E_e x B0 contribution on its own.  These
    are sign-indefinite integrals that may vanish, so each converges to
    ``rel_tol`` times the integral of its absolute value (computed first in a
    coarse pass) rather than of its own magnitude.
    """
    if mode not in ("full", "reduced"):
        raise ValueError("mode must be 'full' or 'reduced'")
    spec = spec or QuadratureSpec()
    if surface.region.contains(state.r):
        raise ValueError("electron must be outside the Poynting surface")
    coarse = QuadratureSpec(rel_tol=1e-3, abs_tol=spec.abs_tol, max_subdivisions=spec.max_subdivisions, base_order=spec.base_order)
    scales = _poynting_components(source, state, surface, coarse, True)
    abs_scale = max(r.value for r in scales[:2])
    tight = replace(spec, abs_tol=max(spec.abs_tol, spec.rel_tol * abs_scale))
    full, reduced, cross = _poynting_components(source, state, surface, tight, False)
    return PoyntingReport(
        R_full=full.value,
        R_reduced=reduced.value,
        cross_surface_term=cross.value,
        cross_surface_scale=scales[2].value,
        errors=(full.error_estimate, reduced.error_estimate, cross.error_estimate),
        converged=full.converged and reduced.converged and cross.converged and all(s.converged for s in scales),
        mode=mode,
    )


@dataclass(frozen=True)
class FluxDependence:
    """Flux dependence of R between two source strengths over a time sweep.

    ``bound`` is what the same run certifies: R changes with flux only
    through the E_e x B0 surface term, so the difference cannot exceed the
    measured |cross_surface_term| plus the error estimates of that term and
    of R, both runs summed.
    ``cross_scale`` is the largest integral of |E_e x B0 . dsigma|.
    All three are normalized like the difference.
    """

    normalized_difference: float
    bound: float
    cross_scale: float
    converged: bool


def flux_dependence(
    scenario: Scenario,
    flux_1: float,
    flux_2: float,
    times: Sequence[float],
    mode: str = "full",
) -> FluxDependence:
    from .sources import flux as source_flux

    base = source_flux(scenario.source)
    if base == 0.0:
        raise ValueError("scenario source carries no flux to rescale")
    reports = []
    for target in (flux_1, flux_2):
        scen = scenario.with_flux_factor(target / base)
        reports.append([poynting_rate(scen.source, scen.state(t), scen.surface, scen.spec, mode) for t in times])
    one, two = reports
    diff = max(abs(r1.rate - r2.rate) for r1, r2 in zip(one, two))
    norm = max(max(abs(r.rate) for run in reports for r in run), scenario.spec.abs_tol)
    k = 0 if mode == "full" else 1
    bound = max(
        abs(r1.cross_surface_term) + abs(r2.cross_surface_term) + r1.errors[2] + r2.errors[2] + r1.errors[k] + r2.errors[k]
        for r1, r2 in zip(one, two)
    )
    scale = max(r.cross_surface_scale for run in reports for r in run)
    ok = all(r.converged for run in reports for r in run)
    return FluxDependence(diff / norm, bound / norm, scale / norm, ok)


def flux_independence_check(
    scenario: Scenario,
    flux_1: float,
    flux_2: float,
    times: Sequence[float],
    mode: str = "full",
) -> float:
    """max_t |R(F1, t) - R(F2, t)| / max(max_t |R|, abs_tol per second).

    The source current is rescaled so that its flux equals F1 and F2 in turn
    (flux is linear in the current).
    """
    return flux_dependence(scenario, flux_1, flux_2, times, mode).normalized_difference
