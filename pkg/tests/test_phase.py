import math

import numpy as np
import pytest
from scipy import integrate

from abfield.core import CGS
from abfield.phase import (
    BeamPath,
    PathError,
    enclosed_flux,
    fringe_pattern,
    gauge_shift,
    path_phase,
    phase_sweep,
    relative_phase,
    standard_paths,
    winding,
)
from abfield.sources import SolenoidSource, flux

K = CGS.phase_per_flux  # e / (hbar c)
QUANTUM = CGS.flux_quantum


def ideal_with_flux(F, radius=1.0):
    # F = pi a^2 * 4 pi n I / c with n = 1
    current = F * CGS.c / (4 * math.pi**2 * radius**2)
    return SolenoidSource(radius=radius, length=10.0, turns_per_cm=1.0, current=current, ideal_infinite=True)


def arc(radius, a0, a1, sides, z=0.0, index=1):
    angles = np.linspace(a0, a1, sides + 1)
    return BeamPath(tuple((radius * math.cos(t), radius * math.sin(t), z) for t in angles), index)


# ---------------------------------------------------------------------------
# path_phase
# ---------------------------------------------------------------------------


def test_zero_flux_zero_phase():
    src = ideal_with_flux(0.0)
    assert path_phase(src, arc(2.0, 0.0, 2.0, 7)) == 0.0


def test_radial_path_has_no_phase():
    src = ideal_with_flux(QUANTUM)
    path = BeamPath(((1.5, 0.0, 0.0), (9.0, 0.0, 0.0)))
    assert path_phase(src, path) == 0.0


@pytest.mark.parametrize("sides", [1, 2, 8, 33])
def test_semicircle_gives_half_flux(sides):
    F = 0.37 * QUANTUM
    src = ideal_with_flux(F)
    # polygon corners stay outside the source for any side count >= 2; a single chord would cut through
    if sides == 1:
        path = BeamPath(((2.0, 0.0, 0.0), (0.0, 2.0, 0.0), (-2.0, 0.0, 0.0)))
    else:
        path = arc(2.0, 0.0, math.pi, sides)
    assert path_phase(src, path) == pytest.approx(K * F / 2, rel=1e-8)


def test_path_through_source_rejected():
    src = ideal_with_flux(QUANTUM)
    with pytest.raises(PathError):
        path_phase(src, BeamPath(((-3.0, 0.1, 0.0), (3.0, 0.1, 0.0))))


def test_finite_source_allows_paths_beyond_its_ends():
    src = SolenoidSource(radius=1.0, length=10.0, turns_per_cm=1.0, current=1.0)
    path = BeamPath(((-3.0, 0.0, 8.0), (3.0, 0.0, 8.0)))
    assert math.isfinite(path_phase(src, path))


# ---------------------------------------------------------------------------
# relative_phase
# ---------------------------------------------------------------------------


def test_relative_phase_zero_flux():
    p1, p2 = standard_paths(3.0)
    res = relative_phase(ideal_with_flux(0.0), p1, p2, phi0=0.4)
    assert res.phi_of_F == 0.4
    assert res.winding == 1.0


def test_one_flux_quantum_gives_two_pi():
    p1, p2 = standard_paths(3.0)
    res = relative_phase(ideal_with_flux(QUANTUM), p1, p2)
    assert res.shift == pytest.approx(2 * math.pi, rel=1e-10)
    assert res.slope == K


def test_screen_point_independence():
    src = ideal_with_flux(2.6 * QUANTUM)
    phases = []
    for radius, angle, sides in [(3.0, 0.0, 16), (2.0, 0.6, 9), (5.0, -1.1, 40)]:
        p1, p2 = standard_paths(radius, 0.0, angle, sides)
        phases.append(relative_phase(src, p1, p2).phi_of_F)
    assert max(phases) - min(phases) <= 1e-8


def test_endpoint_mismatch_rejected():
    p1, _ = standard_paths(3.0)
    p2 = arc(3.0, math.pi, 0.1, 5, index=2)
    with pytest.raises(PathError):
        relative_phase(ideal_with_flux(QUANTUM), p1, p2)


def test_zero_winding_reported():
    src = ideal_with_flux(QUANTUM)
    p1 = BeamPath(((3.0, 0.0, 0.0), (3.0, 2.0, 0.0), (0.0, 4.0, 0.0)))
    p2 = BeamPath(((3.0, 0.0, 0.0), (2.0, 3.0, 0.0), (0.0, 4.0, 0.0)), 2)
    res = relative_phase(src, p1, p2)
    assert res.winding == 0.0
    assert abs(res.shift) <= 1e-8


def test_winding_counts_turns():
    src = ideal_with_flux(QUANTUM)
    loop = arc(2.0, 0.0, 4 * math.pi, 16)
    assert winding(src, loop) == pytest.approx(2.0, abs=1e-12)
    assert winding(src, loop.reversed()) == pytest.approx(-2.0, abs=1e-12)


def test_path_deformation_invariance():
    src = ideal_with_flux(1.3 * QUANTUM)
    start, end = (-3.0, 0.0, 0.0), (3.0, 0.0, 0.0)
    lower = standard_paths(3.0)[0]
    wiggly = BeamPath((start, (-2.0, -5.0, 1.0), (0.5, -1.8, -2.0), (4.0, -6.0, 0.0), (2.5, -0.5, 0.3), end))
    assert abs(path_phase(src, lower) - path_phase(src, wiggly)) <= 1e-8


def test_flux_law_sweep_ideal():
    p1, p2 = standard_paths(3.0)
    src = ideal_with_flux(QUANTUM)
    fluxes = np.linspace(0.0, 2.0 * QUANTUM, 5)
    pairs = phase_sweep(src, p1, p2, fluxes)
    F = np.array([p[0] for p in pairs])
    phi = np.array([p[1] for p in pairs])
    slope = np.polyfit(F, phi, 1)[0]
    assert slope == pytest.approx(K, rel=1e-6)


def test_flux_law_sweep_finite_within_fringe_bound():
    src = SolenoidSource(radius=1.0, length=100.0, turns_per_cm=1.0, current=1.0)
    p1, p2 = standard_paths(3.0)
    fluxes = np.linspace(0.0, 2.0 * QUANTUM, 5)
    pairs = phase_sweep(src, p1, p2, fluxes)
    slope = np.polyfit([p[0] for p in pairs], [p[1] for p in pairs], 1)[0]
    # the loop also encloses the return flux between a and the paths
    fringe = abs(enclosed_flux(src, p1, p2) - flux(src)) / flux(src)
    assert abs(slope / K - 1.0) <= 1.01 * fringe + 1e-8
    assert fringe < 5e-3


def test_stokes_equality_finite_source():
    src = SolenoidSource(radius=1.0, length=40.0, turns_per_cm=1.0, current=1.0, stack_rel_tol=1e-11)
    sides = 12
    p1, p2 = standard_paths(2.5, 0.0, 0.0, sides)
    loop = np.vstack([p1.array, p2.array[::-1][1:]])
    # radius of the closed polygon as a function of angle
    verts = loop[:-1]
    ang = np.arctan2(verts[:, 1], verts[:, 0])
    order = np.argsort(ang)
    verts, ang = verts[order], ang[order]

    def r_of(phi):
        k = np.searchsorted(ang, phi) % len(ang)
        a, b = verts[k - 1], verts[k]
        d = np.array([math.cos(phi), math.sin(phi)])
        # intersection of the ray with the edge a-b
        m = np.array([[d[0], a[0] - b[0]], [d[1], a[1] - b[1]]])
        return np.linalg.solve(m, a[:2])[0]

    def bz_rho(rho):
        return float(src.fields_cyl(np.array(rho), np.array(0.0))[1]) * rho

    inner = integrate.quad(bz_rho, 0.0, 1.0, epsabs=0, epsrel=1e-12)[0]
    ring = lambda phi: integrate.quad(bz_rho, 1.0, r_of(phi), epsabs=0, epsrel=1e-12)[0]
    pts = sorted(set(float(a) for a in ang))
    outer = sum(integrate.quad(ring, lo, hi, epsabs=0, epsrel=1e-10)[0] for lo, hi in zip([-math.pi] + pts, pts + [math.pi]))
    disc = 2 * math.pi * inner + outer
    res = relative_phase(src, p1, p2)
    assert res.shift == pytest.approx(K * disc, rel=1e-7)


# ---------------------------------------------------------------------------
# gauge
# ---------------------------------------------------------------------------


def test_constant_gauge_changes_nothing():
    src = ideal_with_flux(QUANTUM)
    path = arc(2.0, 0.3, 2.9, 6)
    shifted = gauge_shift(src, lambda r: np.full(np.shape(r)[:-1], 5.0))
    assert path_phase(shifted, path) == path_phase(src, path)


def _random_chi(rng):
    k = rng.normal(size=3)
    k2 = rng.normal(size=3) * 0.3
    amp = rng.uniform(0.5, 3.0) / K
    off = rng.uniform(0, 2 * math.pi)

    def chi(r):
        r = np.asarray(r)
        return amp * (np.sin(r @ k + off) + 0.2 * (r @ k2) ** 2)

    return chi


def test_open_path_shift_is_gradient_difference():
    src = SolenoidSource(radius=1.0, length=50.0, turns_per_cm=1.0, current=1.0)
    chi = _random_chi(np.random.default_rng(9))
    path = BeamPath(((-3.0, 0.5, 0.0), (-1.0, -2.5, 1.0), (2.0, -2.0, 0.5), (3.0, 1.0, 0.0)))
    shift = path_phase(gauge_shift(src, chi), path) - path_phase(src, path)
    expected = K * (chi(path.end) - chi(path.origin))
    assert shift == pytest.approx(expected, abs=1e-6)


def test_closed_loop_phase_invariant_under_random_gauges():
    src = SolenoidSource(radius=1.0, length=100.0, turns_per_cm=1.0, current=1.0)
    p1, p2 = standard_paths(3.0)
    base = relative_phase(src, p1, p2).phi_of_F
    rng = np.random.default_rng(2024)
    for _ in range(10):
        shifted = gauge_shift(src, _random_chi(rng))
        assert abs(relative_phase(shifted, p1, p2).phi_of_F - base) <= 1e-6


def test_linear_gauge_axial_path_exact():
    src = ideal_with_flux(QUANTUM)
    g = 3e-8
    chi = lambda r: g * np.asarray(r)[..., 2]
    path = BeamPath(((2.0, 0.0, -1.0), (2.0, 0.0, 4.0)))
    shift = path_phase(gauge_shift(src, chi), path) - path_phase(src, path)
    assert shift == pytest.approx(K * g * 5.0, rel=1e-9)


def test_gauge_step_validated():
    with pytest.raises(ValueError):
        gauge_shift(ideal_with_flux(1.0), lambda r: 0.0, step=0.0)


# ---------------------------------------------------------------------------
# fringes
# ---------------------------------------------------------------------------


def test_fringe_maximum_at_origin():
    pat = fringe_pattern(0.0, 1.0, -0.5, 0.5, 101)
    xs, ys = zip(*pat)
    assert xs[int(np.argmax(ys))] == 0.0
    assert max(ys) == 2.0


def test_fringe_full_period_shift():
    a = np.array(fringe_pattern(0.0, 1.3, -2.0, 2.0, 401))[:, 1]
    b = np.array(fringe_pattern(2 * math.pi, 1.3, -2.0, 2.0, 401))[:, 1]
    assert np.max(np.abs(a - b)) <= 1e-12


def test_fringe_half_period_swaps_extrema():
    a = np.array(fringe_pattern(0.0, 1.0, -1.0, 1.0, 201))[:, 1]
    b = np.array(fringe_pattern(math.pi, 1.0, -1.0, 1.0, 201))[:, 1]
    assert np.allclose(a + b, 2.0, atol=1e-12)
    assert np.all((a >= 0) & (a <= 2))


@pytest.mark.parametrize("spacing, n", [(0.0, 10), (-1.0, 10), (1.0, 1)])
def test_fringe_validation(spacing, n):
    with pytest.raises(ValueError):
        fringe_pattern(0.0, spacing, 0.0, 1.0, n)
