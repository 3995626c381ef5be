"""Deterministic adaptive tensor-product Gauss-Legendre quadrature.

Every integral is computed on a set of boxes in parameter space.  Each box
is integrated with order ``p`` and ``2p`` rules; the difference is that box's
error estimate and the ``2p`` value is kept.  Boxes whose error is out of
proportion are bisected along their physically longest side until the
total error meets ``max(rel_tol * |value|, abs_tol)`` or no box may be split
further.

Box values are reduced with :func:`math.fsum`, which is correctly rounded and
therefore independent of evaluation order.  That is what makes results
bit-identical for any ``ABFIELD_THREADS`` setting.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .core import CylinderRegion, Frame, OrientedSurface, TorusRegion

EPS = np.finfo(np.float64).eps
MAX_BOXES = 200_000


class QuadratureError(RuntimeError):
    """An integral failed to converge where the caller demanded convergence."""

    def __init__(self, message: str, result: "IntegralResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_subdivisions: int = 12
    base_order: int = 8

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be > 0")
        if int(self.base_order) < 2:
            raise ValueError("base_order must be >= 2")
        if int(self.max_subdivisions) < 0:
            raise ValueError("max_subdivisions must be >= 0")

    def doubled(self) -> "QuadratureSpec":
        return replace(self, base_order=2 * self.base_order)


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool

    def require(self, what: str = "integral") -> "IntegralResult":
        if not self.converged:
            raise QuadratureError(
                f"{what} did not converge: value={self.value:.6e} "
                f"error_estimate={self.error_estimate:.3e}",
                self,
            )
        return self


def worker_count() -> int:
    raw = os.environ.get("ABFIELD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# ---------------------------------------------------------------------------
# box engine
# ---------------------------------------------------------------------------


@dataclass
class _Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    depth: int
    values: np.ndarray = field(default=None)
    errors: np.ndarray = field(default=None)


def _rule_on_box(func, lower, upper, order):
    axes = []
    weights = []
    for lo, hi in zip(lower, upper):
        x, w = gauss_legendre(order)
        h = hi - lo
        axes.append(lo + h * x)
        weights.append(h * w)
    vals = np.asarray(func(axes), dtype=np.float64)
    ndim = len(axes)
    if vals.ndim == ndim:
        vals = vals[None]
    wt = weights[0]
    for w in weights[1:]:
        wt = np.multiply.outer(wt, w)
    flat = vals.reshape(vals.shape[0], -1) * wt.reshape(-1)
    total = np.array([math.fsum(row) for row in flat])
    abs_total = np.abs(flat).sum(axis=1)
    return total, abs_total


def _evaluate_box(func, box: _Box, order: int) -> _Box:
    coarse, _ = _rule_on_box(func, box.lower, box.upper, order)
    fine, abs_fine = _rule_on_box(func, box.lower, box.upper, 2 * order)
    box.values = fine
    # order-doubling difference plus a rounding floor for the fine sum
    box.errors = np.abs(fine - coarse) + 64.0 * EPS * abs_fine
    return box


def _initial_boxes(breaks: Sequence[Sequence[float]]) -> list[_Box]:
    grids = [sorted(set(float(b) for b in bs)) for bs in breaks]
    boxes = []
    for idx in np.ndindex(*[len(g) - 1 for g in grids]):
        lower = tuple(grids[d][i] for d, i in enumerate(idx))
        upper = tuple(grids[d][i + 1] for d, i in enumerate(idx))
        if all(u > l for l, u in zip(lower, upper)):
            boxes.append(_Box(lower, upper, 0))
    return boxes


def _split(box: _Box, dim_scale: Sequence[float]) -> tuple[_Box, _Box]:
    extents = [(u - l) * s for l, u, s in zip(box.lower, box.upper, dim_scale)]
    d = int(np.argmax(extents))
    mid = 0.5 * (box.lower[d] + box.upper[d])
    up1 = list(box.upper)
    up1[d] = mid
    lo2 = list(box.lower)
    lo2[d] = mid
    return (
        _Box(box.lower, tuple(up1), box.depth + 1),
        _Box(tuple(lo2), box.upper, box.depth + 1),
    )


def integrate_boxes(
    func: Callable[[list[np.ndarray]], np.ndarray],
    breaks: Sequence[Sequence[float]],
    spec: QuadratureSpec,
    dim_scale: Sequence[float] | None = None,
) -> list[IntegralResult]:
    """Adaptive integration of ``func`` over the box partition ``breaks``.

    ``func`` receives one 1-D node array per dimension and must return the
    integrand on their tensor grid, shape ``(n1, ..., nd)`` or, for several
    components, ``(k, n1, ..., nd)``.  One :class:`IntegralResult` is
    returned per component.
    """
    ndim = len(breaks)
    if dim_scale is None:
        dim_scale = (1.0,) * ndim
    order = int(spec.base_order)
    per_box_evals = order**ndim + (2 * order) ** ndim
    workers = worker_count()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def evaluate(new):
        if pool is None:
            return [_evaluate_box(func, b, order) for b in new]
        return list(pool.map(lambda b: _evaluate_box(func, b, order), new))

    try:
        boxes = evaluate(_initial_boxes(breaks))
        if not boxes:
            raise ValueError("empty integration domain")
        evaluations = per_box_evals * len(boxes)
        converged = False
        while True:
            values = np.array([b.values for b in boxes])
            errors = np.array([b.errors for b in boxes])
            totals = np.array([math.fsum(col) for col in values.T])
            err_tot = np.array([math.fsum(col) for col in errors.T])
            target = np.maximum(spec.rel_tol * np.abs(totals), spec.abs_tol)
            if np.all(err_tot <= target):
                converged = True
                break
            if len(boxes) >= MAX_BOXES:
                break
            score = (errors / target).max(axis=1)
            order_idx = sorted(range(len(boxes)), key=lambda i: (-score[i], i))
            remaining = float(score.sum())
            chosen = []
            for i in order_idx:
                if remaining <= 0.5:
                    break
                remaining -= score[i]
                if boxes[i].depth < spec.max_subdivisions:
                    chosen.append(i)
            if not chosen:
                break
            chosen_set = set(chosen)
            kept = [b for i, b in enumerate(boxes) if i not in chosen_set]
            children = []
            for i in sorted(chosen):
                children.extend(_split(boxes[i], dim_scale))
            evaluations += per_box_evals * len(children)
            boxes = kept + evaluate(children)
        return [
            IntegralResult(float(v), float(e), int(evaluations), bool(converged))
            for v, e in zip(totals, err_tot)
        ]
    finally:
        if pool is not None:
            pool.shutdown()


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    spec: QuadratureSpec | None = None,
    breakpoints: Sequence[float] = (),
) -> IntegralResult:
    """Adaptive integral of a vectorized scalar function over [a, b]."""
    spec = spec or QuadratureSpec()
    if b == a:
        return IntegralResult(0.0, 0.0, 0, True)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = [a] + [p for p in breakpoints if a < p < b] + [b]
    (res,) = integrate_boxes(lambda axes: f(axes[0]), [pts], spec)
    return replace(res, value=sign * res.value)


# ---------------------------------------------------------------------------
# volumes and surfaces of revolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeNodes:
    """Tensor grid of quadrature nodes inside a solid of revolution.

    ``rho`` and ``z`` are local cylindrical coordinates with shape
    ``(np, 1, nq)``; ``phi`` has shape ``(1, nphi, 1)``.  Integrands that only
    need axisymmetric quantities can evaluate them on the (rho, z) plane and
    broadcast over ``phi``.
    """

    rho: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    frame: Frame

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.rho.shape[0], self.phi.shape[1], self.rho.shape[2]

    def local_points(self) -> np.ndarray:
        rho, phi, z = np.broadcast_arrays(self.rho, self.phi, self.z)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)

    def points(self) -> np.ndarray:
        return self.frame.point_to_global(self.local_points())


@dataclass(frozen=True)
class SurfaceNodes:
    """Tensor grid on an oriented surface; arrays have shape ``(nu, nv)``.

    ``rho`` and ``z`` (shape ``(1, nv)``) locate the meridian in the surface's
    local frame; ``dsigma`` is the inward area vector per unit (u, v).
    """

    u: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    points: np.ndarray
    dsigma: np.ndarray
    frame: Frame


def _region_breaks(region, p_breaks, q_breaks, phi_breaks):
    p0, p1, q0, q1 = region.meridian_box
    pb = [p0, p1] + [p for p in p_breaks if p0 < p < p1]
    qb = [q0, q1] + [q for q in q_breaks if q0 < q < q1]
    phib = [0.0, 2.0 * math.pi] + [p for p in phi_breaks if 0.0 < p < 2.0 * math.pi]
    return pb, phib, qb


def integrate_region(
    g: Callable[[VolumeNodes], np.ndarray],
    region: CylinderRegion | TorusRegion,
    spec: QuadratureSpec | None = None,
    *,
    p_breaks: Sequence[float] = (),
    q_breaks: Sequence[float] = (),
    phi_breaks: Sequence[float] = (0.5 * math.pi, math.pi, 1.5 * math.pi),
) -> list[IntegralResult]:
    """Volume integrals of the components returned by ``g``.

    The parameter box is ``(p, phi, q)``: ``(rho, phi, z)`` for a cylinder and
    ``(s, phi, theta)`` for a torus, with ``s`` the distance from the tube
    centre and ``theta`` the poloidal angle.  Breakpoints are in those
    native coordinates.
    """
    spec = spec or QuadratureSpec()
    frame = region.frame
    if isinstance(region, CylinderRegion):
        outer = region.radius
        scale = (1.0, outer, 1.0)
    else:
        outer = region.major_radius + region.minor_radius
        scale = (1.0, outer, region.minor_radius)

    def func(axes):
        p, phi, q = axes
        rho, z, jac = region.meridian(p[:, None], q[None, :])
        rho = np.broadcast_to(rho, (p.size, q.size))[:, None, :]
        z = np.broadcast_to(z, (p.size, q.size))[:, None, :]
        jac = np.broadcast_to(jac, (p.size, q.size))[:, None, :]
        nodes = VolumeNodes(rho, phi[None, :, None], z, frame)
        return np.asarray(g(nodes)) * jac

    return integrate_boxes(func, _region_breaks(region, p_breaks, q_breaks, phi_breaks), spec, scale)


def volume_integral(
    f: Callable[[np.ndarray], np.ndarray],
    region: CylinderRegion | TorusRegion,
    spec: QuadratureSpec | None = None,
    **breaks,
) -> IntegralResult:
    """Integral of the scalar field ``f(points[..., 3])`` over ``region``."""
    (res,) = integrate_region(lambda nodes: f(nodes.points()), region, spec, **breaks)
    return res


def integrate_surface(
    g: Callable[[SurfaceNodes], np.ndarray],
    surface: OrientedSurface,
    spec: QuadratureSpec | None = None,
    *,
    v_breaks: Sequence[float] = (),
    u_breaks: Sequence[float] = (0.25, 0.5, 0.75),
) -> list[IntegralResult]:
    """Surface integrals over the unit (u, v) square of ``surface``.

    ``g`` receives :class:`SurfaceNodes` and returns the scalar integrand
    (already contracted with ``dsigma``) with shape ``(nu, nv)`` or
    ``(k, nu, nv)``.
    """
    spec = spec or QuadratureSpec()
    frame = surface.frame
    region = surface.region
    if isinstance(region, CylinderRegion):
        scale = (2.0 * math.pi * region.radius, 2.0 * region.radius + 2.0 * region.half_length)
    else:
        scale = (
            2.0 * math.pi * (region.major_radius + region.minor_radius),
            2.0 * math.pi * region.minor_radius,
        )
    vb = [0.0, 1.0] + list(surface.v_breakpoints) + [v for v in v_breaks if 0 < v < 1]
    ub = [0.0, 1.0] + [u for u in u_breaks if 0 < u < 1]

    def func(axes):
        u, v = axes
        rho, z, n_rho, n_z, speed = surface.meridian(v)
        phi = 2.0 * np.pi * u[:, None]
        cphi, sphi = np.cos(phi), np.sin(phi)
        rr = rho[None, :]
        local = np.stack(np.broadcast_arrays(rr * cphi, rr * sphi, z[None, :]), axis=-1)
        jac = (2.0 * np.pi * rho * speed)[None, :]
        dsig = np.stack(
            np.broadcast_arrays(n_rho[None, :] * cphi * jac, n_rho[None, :] * sphi * jac, n_z[None, :] * jac),
            axis=-1,
        )
        nodes = SurfaceNodes(
            u=u[:, None],
            v=v[None, :],
            rho=rho[None, :],
            z=z[None, :],
            points=frame.point_to_global(local),
            dsigma=frame.vector_to_global(dsig),
            frame=frame,
        )
        return g(nodes)

    return integrate_boxes(func, [ub, vb], spec, scale)


def surface_flux_integral(
    vf: Callable[[np.ndarray], np.ndarray],
    surface: OrientedSurface,
    spec: QuadratureSpec | None = None,
    **breaks,
) -> IntegralResult:
    """Flux of the vector field ``vf(points[..., 3]) -> [..., 3]`` into ``surface``."""

    def g(nodes):
        return np.sum(vf(nodes.points) * nodes.dsigma, axis=-1)

    (res,) = integrate_surface(g, surface, spec, **breaks)
    return res


# ---------------------------------------------------------------------------
# power-law fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    samples: tuple[tuple[float, float], ...]
    exponent: float
    prefactor: float
    r_squared: float


def power_law_fit(samples: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares fit of ``y = C x**p`` in log-log space."""
    pts = [(float(x), float(y)) for x, y in samples]
    if len(pts) < 3:
        raise ValueError("power_law_fit needs at least 3 samples")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power_law_fit requires finite, strictly positive samples")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(tuple(pts), float(slope), float(math.exp(intercept)), r2)
