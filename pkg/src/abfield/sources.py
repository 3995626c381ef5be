"""External field sources: finite solenoid, charged rotor, magnetized whisker.

All three are azimuthal current sheets of radius ``a`` and length ``l``.
Their field is the axial integral of circular-loop fields, each evaluated
with complete elliptic integrals computed by the arithmetic-geometric mean.

Gaussian units: a sheet current K (statA per cm) gives B = 4*pi*K/c inside
a long sheet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import CGS, Frame, PhysicalConstants, vec3
from .quadrature import IntegralResult, QuadratureError, QuadratureSpec, integrate_1d, integrate_boxes

SHEET_EXCLUSION = 1e-9  # in units of the sheet radius


class SheetSingularityError(ValueError):
    """Field requested on (or within 1e-9 a of) an idealized current sheet."""


# ---------------------------------------------------------------------------
# complete elliptic integrals
# ---------------------------------------------------------------------------


def ellipke(m, m1=None, tol: float = 1e-14):
    """Complete elliptic integrals K(m), E(m) by the AGM.

    ``m1 = 1 - m`` may be supplied directly to keep accuracy as m -> 1.
    """
    m = np.asarray(m, dtype=np.float64)
    m1 = 1.0 - m if m1 is None else np.asarray(m1, dtype=np.float64)
    if np.any(m1 <= 0) or np.any(m < 0):
        raise ValueError("ellipke requires 0 <= m < 1")
    a = np.ones_like(m1)
    b = np.sqrt(m1)
    c2_sum = 0.5 * m
    power = 0.5
    for _ in range(60):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        power *= 2.0
        c2_sum = c2_sum + power * c * c
        if np.all(np.abs(c) <= tol * a):
            break
    K = np.pi / (2.0 * a)
    return K, K * (1.0 - c2_sum)


def _series_coefficients(n_terms: int):
    c = np.empty(n_terms + 2)
    c[0] = 1.0
    for n in range(1, n_terms + 2):
        c[n] = c[n - 1] * ((2.0 * n - 1.0) / (2.0 * n)) ** 2
    # h(m) = ((2-m)K - 2E) / m^2 and g(m) = ((1-m/2)E - (1-m)K) / m^2
    h = np.array([4.0 * n * c[n] / (2.0 * n - 1.0) - c[n - 1] for n in range(2, n_terms + 2)])
    g = np.array(
        [
            c[n - 1] - 2.0 * n * c[n] / (2.0 * n - 1.0) - c[n - 1] / (2.0 * (3.0 - 2.0 * n))
            for n in range(2, n_terms + 2)
        ]
    )
    return 0.5 * np.pi * h, 0.5 * np.pi * g


_H_SERIES, _G_SERIES = _series_coefficients(48)
_SERIES_LIMIT = 0.3


def _horner(coeffs, x):
    out = np.zeros_like(x)
    for cf in coeffs[::-1]:
        out = out * x + cf
    return out


def loop_kernels(m, m1):
    """Return K, E, g(m), h(m) with the small-m combinations series-stabilized."""
    K, E = ellipke(m, m1)
    small = m < _SERIES_LIMIT
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(small, _horner(_G_SERIES, m), ((1.0 - 0.5 * m) * E - m1 * K) / (m * m))
        h = np.where(small, _horner(_H_SERIES, m), ((1.0 + m1) * K - 2.0 * E) / (m * m))
    return K, E, g, h


def loop_field(radius: float, current: float, rho, z, c: float = CGS.c):
    """Field and potential of a circular loop centred on the z axis at z = 0.

    Returns ``(B_rho, B_z, A_phi)`` at cylindrical coordinates ``(rho, z)``.
    Positive current circulates counter-clockwise seen from +z.
    """
    rho, z = np.broadcast_arrays(np.asarray(rho, dtype=np.float64), np.asarray(z, dtype=np.float64))
    a = float(radius)
    d2 = (a + rho) ** 2 + z * z
    near2 = (a - rho) ** 2 + z * z
    if np.any(near2 <= (SHEET_EXCLUSION * a) ** 2):
        raise SheetSingularityError("field point on the current loop")
    m = 4.0 * a * rho / d2
    m1 = near2 / d2
    K, E, g, h = loop_kernels(m, m1)
    d = np.sqrt(d2)
    pref = 2.0 * current / (c * d)
    b_z = pref * (K + (a * a - rho * rho - z * z) / near2 * E)
    b_rho = pref * z * (4.0 * a / d2) * m * g / m1
    a_phi = pref * 2.0 * a * (4.0 * a * rho / d2) * h
    return b_rho, b_z, a_phi


# ---------------------------------------------------------------------------
# sheet sources
# ---------------------------------------------------------------------------

_AXIAL_ORDER = 16
_AXIAL_PANEL_WIDTH = 2.0
_AXIAL_MAX_DOUBLINGS = 10
_ROUNDING = 1e-11


def _sheet_stack(a, half_length, rho, z, rel_tol, c):
    """Integrate unit-sheet loop fields over z' in [-half_length, half_length].

    The substitution z' = z + delta*sinh(s), delta = |rho - a|, resolves the
    near-sheet peak of the integrand; each point gets a panel count that
    doubles until its (B_rho, B_z, A_phi) estimate settles.
    """
    rho = np.asarray(rho, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    npts = rho.size
    delta = np.abs(rho - a)
    delta = np.maximum(delta, SHEET_EXCLUSION * a)
    s_lo = np.arcsinh((-half_length - z) / delta)
    s_hi = np.arcsinh((half_length - z) / delta)
    width = s_hi - s_lo
    x, w = np.polynomial.legendre.leggauss(_AXIAL_ORDER)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w

    def rule(idx, panels):
        rows = idx.size
        h = width[idx] / panels
        starts = s_lo[idx][:, None] + h[:, None] * np.arange(panels)[None, :]
        s = (starts[:, :, None] + h[:, None, None] * x[None, None, :]).reshape(rows, -1)
        wt = (h[:, None, None] * np.broadcast_to(w, (rows, panels, _AXIAL_ORDER))).reshape(rows, -1)
        dl = delta[idx][:, None]
        zp = z[idx][:, None] + dl * np.sinh(s)
        jac = wt * dl * np.cosh(s)
        br, bz, ap = loop_field(a, 1.0, rho[idx][:, None], z[idx][:, None] - zp, c)
        terms = [br * jac, bz * jac, ap * jac]
        sums = np.stack([t.sum(axis=1) for t in terms], axis=1)
        mags = np.stack([np.abs(t).sum(axis=1) for t in terms], axis=1)
        return sums, mags

    out = np.empty((npts, 3))
    base = np.maximum(1, np.ceil(width / _AXIAL_PANEL_WIDTH)).astype(int)
    buckets = 2 ** np.ceil(np.log2(base)).astype(int)
    scale = 4.0 * np.pi / c  # interior field of a unit sheet
    for panels0 in np.unique(buckets):
        idx = np.nonzero(buckets == panels0)[0]
        panels = int(panels0)
        prev, _ = rule(idx, panels)
        for _ in range(_AXIAL_MAX_DOUBLINGS):
            panels *= 2
            cur, mags = rule(idx, panels)
            delta_b = np.hypot(cur[:, 0] - prev[:, 0], cur[:, 1] - prev[:, 1])
            delta_a = np.abs(cur[:, 2] - prev[:, 2])
            # rounding level of sums with heavy cancellation
            floor_b = np.maximum(1e-16 * scale, _ROUNDING * np.hypot(mags[:, 0], mags[:, 1]))
            floor_a = np.maximum(1e-16 * scale * a, _ROUNDING * mags[:, 2])
            done = (delta_b <= np.maximum(rel_tol * np.hypot(cur[:, 0], cur[:, 1]), floor_b)) & (
                delta_a <= np.maximum(rel_tol * np.abs(cur[:, 2]), floor_a)
            )
            out[idx[done]] = cur[done]
            idx = idx[~done]
            if idx.size == 0:
                break
            prev = cur[~done]
        else:
            raise QuadratureError("axial loop-stack quadrature failed to converge")
    return out[:, 0], out[:, 1], out[:, 2]


@dataclass(frozen=True)
class SheetSource:
    """Uniform azimuthal surface current K on a cylinder of radius a, length l.

    With ``ideal_infinite`` the sheet is infinitely long: B is uniform inside,
    exactly zero outside, and ``length`` only labels the winding span used by
    circuit calculations.
    """

    radius: float
    length: float
    sheet_current: float
    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)
    ideal_infinite: bool = False
    constants: PhysicalConstants = CGS
    stack_rel_tol: float = 1e-8
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        for key in ("radius", "length"):
            value = float(getattr(self, key))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{key} must be finite and > 0, got {value}")
            object.__setattr__(self, key, value)
        k = float(self.sheet_current)
        if not math.isfinite(k):
            raise ValueError("sheet current must be finite")
        object.__setattr__(self, "sheet_current", k)
        object.__setattr__(self, "center", tuple(float(v) for v in vec3(self.center)))
        object.__setattr__(self, "axis", tuple(float(v) for v in vec3(self.axis)))
        Frame(self.center, self.axis)  # validates the axis

    # -- geometry ---------------------------------------------------------
    @property
    def frame(self) -> Frame:
        return Frame(self.center, self.axis)

    @property
    def half_length(self) -> float:
        return 0.5 * self.length

    @property
    def b_inside(self) -> float:
        """Interior field of the equivalent infinite sheet, 4*pi*K/c."""
        return 4.0 * math.pi * self.sheet_current / self.constants.c

    def sheet_distance(self, rho, z):
        rho, z = np.broadcast_arrays(np.asarray(rho, float), np.asarray(z, float))
        if self.ideal_infinite:
            return np.abs(rho - self.radius)
        over = np.maximum(np.abs(z) - self.half_length, 0.0)
        return np.hypot(rho - self.radius, over)

    def _check(self, rho, z):
        if np.any(self.sheet_distance(rho, z) <= SHEET_EXCLUSION * self.radius):
            raise SheetSingularityError("evaluation point lies on the current sheet")

    # -- axisymmetric evaluation -----------------------------------------
    def fields_cyl(self, rho, z):
        """(B_rho, B_z, A_phi) at local cylindrical (rho, z); broadcasts."""
        rho, z = np.broadcast_arrays(np.asarray(rho, float), np.asarray(z, float))
        self._check(rho, z)
        shape = rho.shape
        a, k = self.radius, self.sheet_current
        if self.ideal_infinite:
            inside = rho < a
            b = self.b_inside
            flux = math.pi * a * a * b
            with np.errstate(divide="ignore", invalid="ignore"):
                a_out = np.where(rho > 0, flux / (2.0 * np.pi * rho), 0.0)
            return (
                np.zeros(shape),
                np.where(inside, b, 0.0),
                np.where(inside, 0.5 * b * rho, a_out),
            )
        if k == 0.0:
            zero = np.zeros(shape)
            return zero, zero.copy(), zero.copy()
        br, bz, ap = _sheet_stack(a, self.half_length, rho, z, self.stack_rel_tol, self.constants.c)
        return (k * br).reshape(shape), (k * bz).reshape(shape), (k * ap).reshape(shape)

    def fields_grid(self, rho_1d, z_1d):
        """Cached :meth:`fields_cyl` on the tensor grid rho_1d x z_1d."""
        rho_1d = np.ascontiguousarray(rho_1d, dtype=np.float64).ravel()
        z_1d = np.ascontiguousarray(z_1d, dtype=np.float64).ravel()
        key = (rho_1d.tobytes(), z_1d.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) > 50_000:
                self._cache.clear()
            hit = self.fields_cyl(rho_1d[:, None], z_1d[None, :])
            self._cache[key] = hit
        return hit

    # -- cartesian evaluation -------------------------------------------
    def _cartesian(self, r, want_b: bool):
        r = np.asarray(r, dtype=np.float64)
        frame = self.frame
        loc = frame.to_local(r)
        x, y, zz = loc[..., 0], loc[..., 1], loc[..., 2]
        rho = np.hypot(x, y)
        br, bz, ap = self.fields_cyl(rho, zz)
        with np.errstate(divide="ignore", invalid="ignore"):
            cx = np.where(rho > 0, x / np.where(rho > 0, rho, 1.0), 0.0)
            sy = np.where(rho > 0, y / np.where(rho > 0, rho, 1.0), 0.0)
        if want_b:
            vec = np.stack([br * cx, br * sy, bz], axis=-1)
        else:
            vec = np.stack([-ap * sy, ap * cx, np.zeros_like(ap)], axis=-1)
        return frame.vector_to_global(vec)

    def b0(self, r):
        return self._cartesian(r, True)

    def a0(self, r):
        return self._cartesian(r, False)

    def scaled(self, factor: float) -> "SheetSource":
        """The same geometry carrying ``factor`` times the sheet current."""
        return replace(self, sheet_current=self.sheet_current * factor)


@dataclass(frozen=True)
class SolenoidSource(SheetSource):
    """Wire-wound solenoid: K = n I."""

    turns_per_cm: float = 1.0
    current: float = 0.0
    sheet_current: float = field(default=0.0, init=False)

    def __post_init__(self):
        n = float(self.turns_per_cm)
        if not (math.isfinite(n) and n > 0):
            raise ValueError(f"turns_per_cm must be finite and > 0, got {n}")
        object.__setattr__(self, "sheet_current", n * float(self.current))
        super().__post_init__()

    def with_current(self, current: float) -> "SolenoidSource":
        return replace(self, current=current)

    def scaled(self, factor: float) -> "SolenoidSource":
        return replace(self, current=self.current * factor)


@dataclass(frozen=True)
class RotorSource(SheetSource):
    """Rotating cylinder with uniform surface charge: K = sigma * omega * a."""

    surface_charge: float = 0.0
    angular_velocity: float = 0.0
    sheet_current: float = field(default=0.0, init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "sheet_current", float(self.surface_charge) * float(self.angular_velocity) * float(self.radius)
        )
        super().__post_init__()

    def scaled(self, factor: float) -> "RotorSource":
        return replace(self, angular_velocity=self.angular_velocity * factor)


@dataclass(frozen=True)
class WhiskerSource(SheetSource):
    """Uniformly axially magnetized rod: bound surface current K = c M."""

    magnetization: float = 0.0
    sheet_current: float = field(default=0.0, init=False)

    def __post_init__(self):
        object.__setattr__(self, "sheet_current", self.constants.c * float(self.magnetization))
        super().__post_init__()

    def scaled(self, factor: float) -> "WhiskerSource":
        return replace(self, magnetization=self.magnetization * factor)


def equivalent_sheet(source: SheetSource) -> SheetSource:
    """Plain :class:`SheetSource` carrying the same current as ``source``."""
    return SheetSource(
        radius=source.radius,
        length=source.length,
        sheet_current=source.sheet_current,
        center=source.center,
        axis=source.axis,
        ideal_infinite=source.ideal_infinite,
        constants=source.constants,
        stack_rel_tol=source.stack_rel_tol,
    )


@dataclass(frozen=True)
class SourceGroup:
    """Superposition of several sources; fields add in list order."""

    sources: tuple

    def b0(self, r):
        total = None
        for s in self.sources:
            val = s.b0(r)
            total = val if total is None else total + val
        return total

    def a0(self, r):
        total = None
        for s in self.sources:
            val = s.a0(r)
            total = val if total is None else total + val
        return total


ExternalField = SheetSource | SourceGroup


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def b0_field(source: ExternalField, r) -> np.ndarray:
    """Magnetic field of ``source`` (gauss) at point(s) ``r``."""
    return source.b0(r)


def a0_potential(source: ExternalField, r) -> np.ndarray:
    """Azimuthal (Coulomb-gauge) vector potential of ``source`` (gauss cm)."""
    return source.a0(r)


def disc_flux(source: SheetSource, disc_radius: float, z: float = 0.0, spec: QuadratureSpec | None = None) -> IntegralResult:
    """Flux of B0 through the coaxial disc of ``disc_radius`` at local height ``z``."""
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300)
    a = source.radius
    breaks = [a] if disc_radius > a else []

    def integrand(rho):
        _, bz, _ = source.fields_cyl(rho, np.full_like(rho, z))
        return 2.0 * np.pi * rho * bz

    return integrate_1d(integrand, 0.0, disc_radius, spec, breaks)


def flux(source: ExternalField, spec: QuadratureSpec | None = None) -> float:
    """Total flux F through the midplane cross-section of radius a."""
    if isinstance(source, SourceGroup):
        return sum(flux(s, spec) for s in source.sources)
    if source.ideal_infinite:
        return math.pi * source.radius**2 * source.b_inside
    if source.sheet_current == 0.0:
        return 0.0
    return disc_flux(source, source.radius, 0.0, spec).require("flux").value


def loop_line_integral(source: ExternalField, loop_radius: float, z: float = 0.0) -> float:
    """Circulation of A0 around the coaxial circle of ``loop_radius`` (exact by symmetry)."""
    if isinstance(source, SourceGroup):
        return sum(loop_line_integral(s, loop_radius, z) for s in source.sources)
    _, _, ap = source.fields_cyl(np.array([loop_radius]), np.array([z]))
    return float(2.0 * np.pi * loop_radius * ap[0])


# ---------------------------------------------------------------------------
# self-inductance
# ---------------------------------------------------------------------------


def nagaoka(length_over_radius: float) -> float:
    """Nagaoka coefficient of a current sheet with the given length/radius.

    Uses the closed form with complete elliptic integrals,
    k = 4/(3 pi sqrt(1-m)) [ (1-m)/m (K - E) + E - sqrt(m) ],
    m = 1 / (1 + (l/2a)^2).
    """
    x = 0.5 * length_over_radius
    m = 1.0 / (1.0 + x * x)
    K, E = ellipke(np.array(m), np.array(1.0 - m))
    K, E = float(K), float(E)
    kp = math.sqrt(1.0 - m)
    return 4.0 / (3.0 * math.pi * kp) * ((kp * kp / m) * (K - E) + E - math.sqrt(m))


@dataclass(frozen=True)
class InductanceResult:
    value: float  # s^2/cm: W = L I^2 / 2
    error_estimate: float
    energy: float  # erg, field self-energy at the source's current
    truncation: float  # cm, final outer margin
    converged: bool


def _graded(center: float, width: float, levels: int, lo: float, hi: float) -> list[float]:
    pts = []
    for k in range(levels):
        off = width * 2.0 ** (-k)
        pts.extend([center - off, center + off])
    return [p for p in pts if lo < p < hi]


def field_energy_all_space(
    source: SheetSource,
    spec: QuadratureSpec | None = None,
    margin: float | None = None,
) -> tuple[IntegralResult, float]:
    """(1/8pi) * integral of B0^2 over all space, truncated and extrapolated.

    The outer boundary (a cylinder extending ``margin`` beyond the sheet) is
    doubled until the estimate settles; the remainder is extrapolated with
    the dipole 1/T^3 law.  Returns the result and the final margin.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-7, abs_tol=1e-300, max_subdivisions=20)
    if source.ideal_infinite:
        raise ValueError("an infinite sheet has infinite field energy")
    a, h = source.radius, source.half_length
    margin = margin or max(2.0 * source.length, 8.0 * a)

    def energy(t):
        rho_max, z_max = a + t, h + t
        rb = [0.0, a, rho_max] + _graded(a, 0.5 * a, 3, 0.0, rho_max)
        zb = [0.0, h, z_max] + _graded(h, 0.5 * a, 3, 0.0, z_max)
        zb += [z for z in np.linspace(0.0, h, 5)[1:-1] if z < h - 0.5 * a]
        rb += [r for r in (2 * a, 4 * a, 8 * a) if a < r < rho_max]
        zb += [h + d for d in (a, 3 * a, 7 * a, 15 * a) if h + d < z_max]

        def func(axes):
            rho, z = axes
            br, bz, _ = source.fields_grid(rho, z)
            # factor 2 for z < 0 by mirror symmetry
            return 2.0 * 2.0 * np.pi * rho[:, None] * (br * br + bz * bz) / (8.0 * np.pi)

        (res,) = integrate_boxes(func, [rb, zb], spec, (1.0, 1.0))
        return res

    prev = energy(margin)
    evaluations = prev.evaluations
    for _ in range(4):
        margin *= 2.0
        cur = energy(margin)
        evaluations += cur.evaluations
        tail = (cur.value - prev.value) / 7.0
        value = cur.value + tail
        # the dipole extrapolation is good to a small fraction of the tail
        err = 0.1 * abs(tail) + cur.error_estimate
        ok = prev.converged and cur.converged and err <= max(spec.rel_tol * abs(value), spec.abs_tol)
        if ok:
            break
        prev = cur
    return IntegralResult(value, err, evaluations, ok), margin


def self_inductance(source: SheetSource, spec: QuadratureSpec | None = None) -> InductanceResult:
    """Inductance L = 2 W_self / I^2 of a finite winding (s^2/cm).

    ``source`` must be a :class:`SolenoidSource`; rotors and whiskers are
    handled through their equivalent one-turn-per-cm winding.  For an ideal
    infinite sheet the long-solenoid value 4 pi^2 n^2 a^2 l / c^2 over the
    nominal ``length`` is returned exactly.
    """
    n, current = _winding(source)
    c = source.constants.c
    ideal = 4.0 * math.pi**2 * n * n * source.radius**2 * source.length / (c * c)
    if source.ideal_infinite:
        energy = 0.5 * ideal * current * current
        return InductanceResult(ideal, 0.0, energy, 0.0, True)
    if current == 0.0:
        if not isinstance(source, SolenoidSource):
            raise ValueError("zero-current rotor/whisker has no defined winding current")
        return replace(self_inductance(replace(source, current=1.0), spec), energy=0.0)
    res, margin = field_energy_all_space(source, spec)
    value = 2.0 * res.value / (current * current)
    err = 2.0 * res.error_estimate / (current * current)
    return InductanceResult(value, err, res.value, margin, res.converged)


def _winding(source: SheetSource) -> tuple[float, float]:
    """(turns per cm, winding current) describing the sheet as a circuit."""
    if isinstance(source, SolenoidSource):
        return source.turns_per_cm, source.current
    return 1.0, source.sheet_current
