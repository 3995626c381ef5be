import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from abfield.core import CGS
from abfield.quadrature import QuadratureSpec
from abfield.sources import (
    RotorSource,
    SheetSingularityError,
    SheetSource,
    SolenoidSource,
    SourceGroup,
    WhiskerSource,
    a0_potential,
    b0_field,
    disc_flux,
    ellipke,
    flux,
    loop_field,
    loop_line_integral,
    nagaoka,
    self_inductance,
)

C = CGS.c
N_UNIT = C / (4 * math.pi)  # n I / c = 1/(4 pi) with I = 1


def ideal(**kw):
    kw.setdefault("radius", 1.0)
    kw.setdefault("length", 10.0)
    return SolenoidSource(turns_per_cm=N_UNIT, current=1.0, ideal_infinite=True, **kw)


def finite(ratio, a=1.0, current=1.0, **kw):
    return SolenoidSource(radius=a, length=ratio * a, turns_per_cm=N_UNIT, current=current, **kw)


# ---------------------------------------------------------------------------
# oracles built on scipy
# ---------------------------------------------------------------------------


def oracle_loop(a, current, rho, z):
    """Textbook loop field from scipy's K(m), E(m)."""
    alpha2 = a * a + rho * rho + z * z - 2 * a * rho
    beta2 = a * a + rho * rho + z * z + 2 * a * rho
    m = 1.0 - alpha2 / beta2
    K, E = special.ellipk(m), special.ellipe(m)
    beta = math.sqrt(beta2)
    pref = 2.0 * current / (C * beta)
    bz = pref * (K + (a * a - rho * rho - z * z) / alpha2 * E)
    br = 0.0 if rho == 0 else pref * z / rho * (-K + (a * a + rho * rho + z * z) / alpha2 * E)
    return br, bz


def oracle_loop_biot_savart(a, current, rho, z):
    """Direct Biot-Savart integral around the loop with scipy quad."""

    def dB(phi, comp):
        dl = np.array([-math.sin(phi), math.cos(phi), 0.0]) * a
        r = np.array([rho, 0.0, z]) - np.array([a * math.cos(phi), a * math.sin(phi), 0.0])
        return (current / C) * np.cross(dl, r)[comp] / np.linalg.norm(r) ** 3

    bx = integrate.quad(dB, 0, 2 * math.pi, args=(0,), epsabs=1e-24, epsrel=1e-13, limit=200)[0]
    bz = integrate.quad(dB, 0, 2 * math.pi, args=(2,), epsabs=1e-24, epsrel=1e-13, limit=200)[0]
    return bx, bz


def oracle_sheet(src, rho, z):
    """Axial stack of scipy-based loop fields integrated with scipy quad."""
    h, k = src.half_length, src.sheet_current
    pts = [zp for zp in (z,) if -h < zp < h]
    br = integrate.quad(lambda zp: oracle_loop(src.radius, k, rho, z - zp)[0], -h, h, points=pts or None, epsabs=1e-24, epsrel=1e-11, limit=400)[0]
    bz = integrate.quad(lambda zp: oracle_loop(src.radius, k, rho, z - zp)[1], -h, h, points=pts or None, epsabs=1e-24, epsrel=1e-11, limit=400)[0]
    return br, bz


def on_axis(src, z):
    h, a = src.half_length, src.radius
    return src.b_inside * 0.5 * ((h - z) / math.hypot(h - z, a) + (h + z) / math.hypot(h + z, a))


# ---------------------------------------------------------------------------
# elliptic integrals and single loops
# ---------------------------------------------------------------------------


@settings(max_examples=200)
@given(st.floats(min_value=0.0, max_value=1.0 - 1e-12))
def test_ellipke_matches_scipy(m):
    K, E = ellipke(np.array(m))
    assert float(K) == pytest.approx(special.ellipk(m), rel=5e-14)
    assert float(E) == pytest.approx(special.ellipe(m), rel=5e-14)


def test_ellipke_near_one_with_complement():
    m1 = 1e-15
    K, _ = ellipke(np.array(1 - m1), np.array(m1))
    assert float(K) == pytest.approx(special.ellipkm1(m1), rel=1e-13)


@pytest.mark.parametrize("rho, z", [(0.0, 0.0), (0.3, 0.2), (0.9, -0.05), (1.5, 0.7), (4.0, -3.0), (1.0, 0.01)])
def test_loop_field_matches_biot_savart(rho, z):
    br, bz, _ = loop_field(1.0, 2.0, np.array(rho), np.array(z))
    ox, oz = oracle_loop_biot_savart(1.0, 2.0, rho, z)
    scale = math.hypot(ox, oz)
    assert abs(float(br) - ox) <= 1e-11 * scale
    assert abs(float(bz) - oz) <= 1e-11 * scale


def test_loop_potential_stokes():
    # circulation of A over a coaxial circle equals the flux of B_z through it
    rho = 0.6
    _, _, ap = loop_field(1.0, 1.0, np.array(rho), np.array(0.25))
    fl = integrate.quad(lambda r: 2 * math.pi * r * oracle_loop(1.0, 1.0, r, 0.25)[1], 0, rho, epsrel=1e-13)[0]
    assert 2 * math.pi * rho * float(ap) == pytest.approx(fl, rel=1e-11)


def test_single_turn_center_field():
    # n * l = 1 turn
    l = 1e-4
    src = SolenoidSource(radius=1.0, length=l, turns_per_cm=1.0 / l, current=1.0)
    b = b0_field(src, np.zeros(3))
    assert b[2] == pytest.approx(2 * math.pi * 1.0 / (C * 1.0), rel=1e-7)
    assert abs(b[0]) < 1e-30 and abs(b[1]) < 1e-30


# ---------------------------------------------------------------------------
# b0_field / a0_potential / flux examples
# ---------------------------------------------------------------------------


def test_ideal_field_inside_and_outside():
    src = ideal()
    assert np.allclose(b0_field(src, np.zeros(3)), [0, 0, 1], rtol=1e-14, atol=0)
    assert np.array_equal(b0_field(src, np.array([2.0, 0.0, 0.0])), [0.0, 0.0, 0.0])


def test_finite_center_field_long_solenoid():
    src = finite(200)
    b = b0_field(src, np.zeros(3))
    assert b[2] == pytest.approx(1.0, rel=1e-3)
    assert b[2] == pytest.approx(on_axis(src, 0.0), rel=1e-9)


@pytest.mark.parametrize("z", [0.0, 3.0, 9.9, 10.0, 10.5, 25.0])
def test_finite_on_axis_formula(z):
    src = finite(20)
    assert b0_field(src, np.array([0.0, 0.0, z]))[2] == pytest.approx(on_axis(src, z), rel=1e-9)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("rho, z", [(0.5, 0.0), (0.95, 4.0), (1.05, -9.5), (2.5, 10.0), (0.2, 12.0), (6.0, 3.0)])
def test_finite_off_axis_matches_scipy_stack(rho, z):
    src = finite(20, stack_rel_tol=1e-11)
    br, bz, _ = src.fields_cyl(np.array(rho), np.array(z))
    obr, obz = oracle_sheet(src, rho, z)
    scale = math.hypot(obr, obz)
    assert abs(float(br) - obr) <= 1e-8 * scale
    assert abs(float(bz) - obz) <= 1e-8 * scale


def test_a0_vanishes_on_axis():
    for src in (ideal(), finite(50), RotorSource(radius=1.0, length=20.0, surface_charge=1.0, angular_velocity=3.0)):
        assert np.array_equal(a0_potential(src, np.array([0.0, 0.0, 0.7])), [0.0, 0.0, 0.0])


def test_ideal_exterior_potential():
    src = SheetSource(radius=1.0, length=10.0, sheet_current=C / (2 * math.pi), ideal_infinite=True)
    assert flux(src) == pytest.approx(2 * math.pi, rel=1e-14)
    a = a0_potential(src, np.array([2.0, 0.0, 0.0]))
    assert np.linalg.norm(a) == pytest.approx(0.5, rel=1e-14)
    assert a[1] > 0 and a[0] == 0.0


def test_exterior_loop_circulation_equals_flux():
    src = finite(100)
    circ = loop_line_integral(src, 3.0)
    spanning = disc_flux(src, 3.0).require().value
    assert circ == pytest.approx(flux(src), rel=1e-2)
    assert circ == pytest.approx(spanning, rel=1e-8)


@pytest.mark.parametrize("radius, z", [(0.3, 0.0), (0.99, 2.0), (1.7, -30.0), (4.0, 51.0)])
def test_stokes_consistency(radius, z):
    src = finite(100)
    res = disc_flux(src, radius, z, QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300))
    res.require()
    tol = res.error_estimate + 1e-8 * abs(res.value)  # stack tolerance on A_phi
    assert abs(loop_line_integral(src, radius, z) - res.value) <= tol


def test_flux_examples():
    assert flux(ideal()) == pytest.approx(math.pi, rel=1e-15)
    src = finite(200)
    assert flux(src) == pytest.approx(math.pi * src.b_inside, rel=1e-3)
    assert flux(finite(200, current=0.0)) == 0.0


def test_flux_is_area_times_center_field():
    src = finite(200)
    assert flux(src) == pytest.approx(math.pi * b0_field(src, np.zeros(3))[2], rel=1e-3)


def test_field_on_sheet_is_rejected():
    with pytest.raises(SheetSingularityError):
        b0_field(finite(10), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(SheetSingularityError):
        a0_potential(ideal(), np.array([0.0, 1.0, 5.0]))
    # beyond the ends of a finite sheet the cylinder surface is field-free space
    assert np.all(np.isfinite(b0_field(finite(10), np.array([1.0, 0.0, 6.0]))))


@pytest.mark.parametrize("kw", [dict(radius=0.0), dict(length=-1.0), dict(turns_per_cm=0.0), dict(current=float("nan"))])
def test_source_validation(kw):
    base = dict(radius=1.0, length=2.0, turns_per_cm=1.0, current=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        SolenoidSource(**base)


# ---------------------------------------------------------------------------
# self-inductance
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("ratio, k", [(20, 0.9588), (10, 0.9201), (4, 0.8181), (2, 0.6884), (1, 0.5255)])
def test_nagaoka_table(ratio, k):
    assert nagaoka(ratio) == pytest.approx(k, abs=6e-5)


def test_nagaoka_mpmath():
    import mpmath as mp

    mp.mp.dps = 30
    for ratio in (0.5, 3.0, 100.0):
        kk = mp.mpf(2) / ratio  # diameter / length
        k2 = kk**2 / (1 + kk**2)
        kp = mp.sqrt(1 - k2)
        ref = 4 / (3 * mp.pi * kp) * ((kp**2 / k2) * (mp.ellipk(k2) - mp.ellipe(k2)) + mp.ellipe(k2) - mp.sqrt(k2))
        assert nagaoka(ratio) == pytest.approx(float(ref), rel=1e-12)


def long_formula(src):
    return 4 * math.pi**2 * src.turns_per_cm**2 * src.radius**2 * src.length / C**2


@pytest.fixture(scope="module")
def inductance_100():
    src = SolenoidSource(radius=1.0, length=100.0, turns_per_cm=10.0, current=1.0)
    return src, self_inductance(src)


def test_inductance_vs_nagaoka(inductance_100):
    src, res = inductance_100
    assert res.converged
    assert res.value == pytest.approx(long_formula(src) * nagaoka(100.0), rel=2e-2)
    # the field-energy route is far tighter than the stated 2%
    assert res.value == pytest.approx(long_formula(src) * nagaoka(100.0), rel=1e-5)


@pytest.mark.slow
def test_inductance_doubles_with_length(inductance_100):
    src, res = inductance_100
    longer = SolenoidSource(radius=1.0, length=200.0, turns_per_cm=10.0, current=1.0)
    assert self_inductance(longer).value == pytest.approx(2 * res.value, rel=2e-2)


def test_inductance_independent_of_current(inductance_100):
    src, res = inductance_100
    other = self_inductance(src.with_current(-37.5))
    assert other.value == pytest.approx(res.value, rel=1e-9)
    zero = self_inductance(src.with_current(0.0))
    assert zero.value == pytest.approx(res.value, rel=1e-9)
    assert zero.energy == 0.0


def test_ideal_inductance_is_long_formula():
    src = SolenoidSource(radius=2.0, length=30.0, turns_per_cm=5.0, current=1.0, ideal_infinite=True)
    assert self_inductance(src).value == pytest.approx(long_formula(src), rel=1e-15)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def test_divergence_free_at_random_points():
    src = finite(10, stack_rel_tol=1e-12)
    rng = np.random.default_rng(20240611)
    pts = []
    while len(pts) < 100:
        rho = rng.uniform(0.0, 3.0)
        z = rng.uniform(-8.0, 8.0)
        if src.sheet_distance(rho, z) > 0.1:
            phi = rng.uniform(0, 2 * math.pi)
            pts.append([rho * math.cos(phi), rho * math.sin(phi), z])
    pts = np.array(pts)
    h = 0.01
    div = np.zeros(len(pts))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        f = lambda s: src.b0(pts + s * e)[:, k]
        # fourth-order central difference
        div += (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)
    b = np.linalg.norm(src.b0(pts), axis=-1)
    length = np.minimum(src.sheet_distance(np.hypot(pts[:, 0], pts[:, 1]), pts[:, 2]), src.radius)
    assert np.all(np.abs(div) <= 1e-6 * b / length)


def test_superposition_is_exact():
    s1 = finite(20)
    s2 = RotorSource(radius=0.5, length=4.0, surface_charge=2.0, angular_velocity=-1e3, center=(3.0, 0.0, 1.0), axis=(1, 0, 1))
    group = SourceGroup((s1, s2))
    r = np.array([[0.3, -2.0, 0.4], [5.0, 1.0, -2.0]])
    assert np.array_equal(group.b0(r), s1.b0(r) + s2.b0(r))
    assert np.array_equal(group.a0(r), s1.a0(r) + s2.a0(r))


def test_rotor_and_whisker_mapping_constants():
    rotor = RotorSource(radius=0.8, length=16.0, surface_charge=3.0, angular_velocity=250.0)
    assert rotor.b_inside == pytest.approx(4 * math.pi * 3.0 * 250.0 * 0.8 / C, rel=1e-15)
    whisker = WhiskerSource(radius=0.8, length=16.0, magnetization=5.0)
    assert whisker.b_inside == pytest.approx(4 * math.pi * 5.0, rel=1e-15)
    r = np.array([[0.1, 0.2, 0.3], [2.0, -1.0, 7.9]])
    for src in (rotor, whisker):
        twin = SolenoidSource(radius=0.8, length=16.0, turns_per_cm=1.0, current=src.sheet_current)
        assert np.allclose(src.b0(r), twin.b0(r), rtol=1e-10, atol=0)
        assert np.allclose(src.a0(r), twin.a0(r), rtol=1e-10, atol=0)


def test_long_whisker_interior_field():
    whisker = WhiskerSource(radius=1.0, length=400.0, magnetization=2.0)
    assert b0_field(whisker, np.zeros(3))[2] == pytest.approx(4 * math.pi * 2.0, rel=1e-4)


@pytest.mark.parametrize("ratio", [10, 20, 50, 100])
def test_exterior_field_below_dipole_bound(ratio):
    src = finite(ratio)
    rho = 10.0
    m = flux(src) * src.length / (4 * math.pi)
    b = np.linalg.norm(b0_field(src, np.array([rho, 0.0, 0.0])))
    assert b <= 1.5 * 2 * m / rho**3


def test_scaled_source_scales_field():
    src = finite(20)
    r = np.array([0.4, 0.1, 3.0])
    assert np.allclose(src.scaled(-2.5).b0(r), -2.5 * src.b0(r), rtol=1e-12, atol=0)
