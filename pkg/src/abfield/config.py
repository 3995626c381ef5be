"""Scenario configuration files.

The format is line oriented::

    # comment
    source.kind = solenoid
    source.radius_cm = 1.0

Every key belongs to a fixed schema.  Unknown keys, missing required keys,
unparsable numbers and out-of-range values are errors that name the key and
the line.  Defaults are filled in after parsing, and the digest is a SHA-256
of the normalized, sorted ``key=value`` lines, so spelling out a default
does not change it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import PRESETS, PhysicalConstants
from .electron import Trajectory
from .energy import Scenario
from .quadrature import QuadratureSpec
from .sources import RotorSource, SheetSource, SolenoidSource, WhiskerSource


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.detail = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# value parsers
# ---------------------------------------------------------------------------


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal with an exponent."""
    return np.format_float_scientific(float(x), unique=True, trim="-")


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"unparsable number {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


def _positive(text):
    v = _number(text)
    if not v > 0:
        raise ValueError(f"must be > 0, got {text}")
    return v


def _nonneg(text):
    v = _number(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {text}")
    return v


def _integer(minimum):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
        if v < minimum:
            raise ValueError(f"must be >= {minimum}, got {v}")
        return v

    return parse


def _boolean(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return text

    return parse


def _vector(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(_number(p) for p in parts)


def _vector_list(text):
    items = [t for t in text.split(";") if t.strip()]
    return tuple(_vector(t) for t in items)


def _number_list(text):
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ValueError("expected at least one number")
    return tuple(_number(t.strip()) for t in items)


@dataclass(frozen=True)
class Sweep:
    """Inclusive linear grid ``start:stop:n`` (a single number means n = 1)."""

    start: float
    stop: float
    count: int

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.start]
        return [float(v) for v in np.linspace(self.start, self.stop, self.count)]

    def canonical(self) -> str:
        return f"{fmt_float(self.start)}:{fmt_float(self.stop)}:{self.count}"


def _sweep(text):
    parts = [p.strip() for p in text.split(":")]
    if len(parts) == 1:
        v = _number(parts[0])
        return Sweep(v, v, 1)
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:n, got {text!r}")
    start, stop = _number(parts[0]), _number(parts[1])
    n = _integer(1)(parts[2])
    if n == 1 and start != stop:
        raise ValueError("a one-point sweep needs start == stop")
    if n > 1 and not stop > start:
        raise ValueError("sweep requires stop > start")
    return Sweep(start, stop, n)


def _canonical(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, Sweep):
        return value.canonical()
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_canonical(v) for v in value)
        return ", ".join(_canonical(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

REQUIRED = object()
OPTIONAL = object()  # no default; builders derive one


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    default: object
    help: str


SCHEMA: dict[str, Key] = {
    "source.kind": Key(_choice("solenoid", "rotor", "whisker"), REQUIRED, "source model"),
    "source.radius_cm": Key(_positive, REQUIRED, "sheet radius a"),
    "source.length_cm": Key(_positive, REQUIRED, "sheet length l (winding span when ideal)"),
    "source.ideal_infinite": Key(_boolean, False, "closed-form infinite sheet"),
    "source.turns_per_cm": Key(_positive, OPTIONAL, "solenoid winding density n"),
    "source.current_statA": Key(_number, OPTIONAL, "solenoid current I"),
    "source.sigma_statC_cm2": Key(_number, OPTIONAL, "rotor surface charge density"),
    "source.omega_rad_s": Key(_number, OPTIONAL, "rotor angular velocity"),
    "source.magnetization_G": Key(_number, OPTIONAL, "whisker magnetization M"),
    "source.center_cm": Key(_vector, (0.0, 0.0, 0.0), "sheet centre"),
    "source.axis": Key(_vector, (0.0, 0.0, 1.0), "sheet axis direction"),
    "source.stack_rel_tol": Key(_positive, 1e-8, "axial loop-stack tolerance"),
    "electron.charge_statC": Key(_number, OPTIONAL, "charge (default -e)"),
    "electron.path": Key(_choice("straight", "arc", "polyline"), "straight", "trajectory kind"),
    "electron.impact_parameter_cm": Key(_positive, OPTIONAL, "flyby distance b (arc: orbit radius)"),
    "electron.speed_cm_s": Key(_nonneg, OPTIONAL, "flyby speed"),
    "electron.z_cm": Key(_number, 0.0, "height of the flyby plane"),
    "electron.times_s": Key(_sweep, REQUIRED, "time samples t0:t1:n"),
    "electron.waypoints_cm": Key(_vector_list, (), "polyline vertices x,y,z; x,y,z; ..."),
    "electron.waypoint_times_s": Key(_number_list, (), "polyline vertex times"),
    "electron.model": Key(_choice("quasi_static", "exact"), "quasi_static", "field model"),
    "region.surface": Key(_choice("cylinder", "torus"), "cylinder", "Poynting surface kind"),
    "region.radius_cm": Key(_positive, OPTIONAL, "region radius (default 1.001 a)"),
    "region.half_length_multiple": Key(_positive, 5.0, "region half-length / source half-length"),
    "region.major_radius_cm": Key(_positive, OPTIONAL, "torus major radius (default 2 a)"),
    "region.minor_radius_cm": Key(_positive, OPTIONAL, "torus minor radius (default a / 2)"),
    "region.cutoff_cm": Key(_positive, OPTIONAL, "excluded ball around an interior electron (default 1e-3 a)"),
    "quadrature.rel_tol": Key(_positive, 1e-6, "relative tolerance"),
    "quadrature.abs_tol": Key(_positive, 1e-12, "absolute tolerance"),
    "quadrature.max_subdivisions": Key(_integer(0), 12, "bisection depth limit per box"),
    "quadrature.base_order": Key(_integer(2), 8, "Gauss-Legendre base order"),
    "constants.system": Key(_choice(*sorted(PRESETS)), "cgs", "unit preset"),
    "phase.flux_quanta": Key(_sweep, Sweep(0.0, 1.0, 5), "flux sweep in units of 2 pi hbar c / e"),
    "phase.phi0_rad": Key(_number, 0.0, "relative phase at zero flux"),
    "phase.path_radius_cm": Key(_positive, OPTIONAL, "beam circle radius (default 3 a)"),
    "phase.screen_angle_rad": Key(_number, 0.0, "azimuth of the screen point"),
    "poynting.mode": Key(_choice("full", "reduced"), "full", "R used for the flux check"),
    "poynting.flux_ratio": Key(_positive, 2.0, "F2 / F1 for the flux-independence check"),
    "scaling.lengths_over_a": Key(_number_list, (25.0, 50.0, 100.0, 200.0), "source lengths for the sweep"),
    "fields.x_cm": Key(_sweep, Sweep(2.0, 2.0, 1), "sample x grid"),
    "fields.y_cm": Key(_sweep, Sweep(0.0, 0.0, 1), "sample y grid"),
    "fields.z_cm": Key(_sweep, Sweep(0.0, 0.0, 1), "sample z grid"),
    "fields.time_s": Key(_number, OPTIONAL, "electron time (default first sample)"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration: every schema key that has a value."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def digest(self) -> str:
        lines = [f"{k}={_canonical(v)}" for k, v in sorted(self.values.items())]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    # -- builders ----------------------------------------------------------
    @property
    def constants(self) -> PhysicalConstants:
        return PRESETS[self["constants.system"]]

    @property
    def spec(self) -> QuadratureSpec:
        return QuadratureSpec(
            rel_tol=self["quadrature.rel_tol"],
            abs_tol=self["quadrature.abs_tol"],
            max_subdivisions=self["quadrature.max_subdivisions"],
            base_order=self["quadrature.base_order"],
        )

    def source(self, length: float | None = None) -> SheetSource:
        common = dict(
            radius=self["source.radius_cm"],
            length=length if length is not None else self["source.length_cm"],
            center=self["source.center_cm"],
            axis=self["source.axis"],
            ideal_infinite=self["source.ideal_infinite"],
            constants=self.constants,
            stack_rel_tol=self["source.stack_rel_tol"],
        )
        kind = self["source.kind"]
        if kind == "solenoid":
            return SolenoidSource(turns_per_cm=self["source.turns_per_cm"], current=self["source.current_statA"], **common)
        if kind == "rotor":
            return RotorSource(
                surface_charge=self["source.sigma_statC_cm2"], angular_velocity=self["source.omega_rad_s"], **common
            )
        return WhiskerSource(magnetization=self["source.magnetization_G"], **common)

    @property
    def times(self) -> list[float]:
        return self["electron.times_s"].values()

    @property
    def charge(self) -> float:
        return self.get("electron.charge_statC", -self.constants.e_charge)

    def trajectory(self) -> Trajectory:
        times = self.times
        t0, t1 = times[0], times[-1]
        kind = self["electron.path"]
        model = self["electron.model"]
        if kind == "straight":
            return Trajectory(
                "straight",
                self.charge,
                t0,
                t1,
                start=(0.0, self["electron.impact_parameter_cm"], self["electron.z_cm"]),
                velocity=(self["electron.speed_cm_s"], 0.0, 0.0),
                constants=self.constants,
                model=model,
            )
        if kind == "arc":
            radius = self["electron.impact_parameter_cm"]
            return Trajectory(
                "arc",
                self.charge,
                t0,
                t1,
                center=(0.0, 0.0, self["electron.z_cm"]),
                radius=radius,
                angular_velocity=self["electron.speed_cm_s"] / radius,
                constants=self.constants,
                model=model,
            )
        return Trajectory(
            "polyline",
            self.charge,
            t0,
            t1,
            waypoints=self["electron.waypoints_cm"],
            times=self["electron.waypoint_times_s"],
            constants=self.constants,
            model=model,
        )

    def scenario(self, length: float | None = None) -> Scenario:
        return Scenario(
            source=self.source(length),
            trajectory=self.trajectory(),
            region_radius=self.get("region.radius_cm"),
            half_length_multiple=self["region.half_length_multiple"],
            surface_kind=self["region.surface"],
            torus_major_radius=self.get("region.major_radius_cm"),
            torus_minor_radius=self.get("region.minor_radius_cm"),
            spec=self.spec,
            electron_cutoff=self.get("region.cutoff_cm"),
        )


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _split_line(raw: str, lineno: int):
    text = raw.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"expected 'section.key = value', got {text!r}", lineno)
    key, value = (p.strip() for p in text.split("=", 1))
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}", lineno)
    if not value:
        raise ConfigError(f"empty value for {key}", lineno)
    return key, value


def parse_config(text: str, overrides: list[str] | tuple[str, ...] = ()) -> ScenarioConfig:
    """Parse and validate configuration text; ``overrides`` are extra ``key=value`` lines."""
    raw: dict[str, tuple[str, int | None, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        item = _split_line(line, lineno)
        if item is None:
            continue
        key, value = item
        if key in raw and raw[key][2] == "file":
            raise ConfigError(f"duplicate key {key!r} (first set on line {raw[key][1]})", lineno)
        raw[key] = (value, lineno, "file")
    for n, item in enumerate(overrides, start=1):
        try:
            parsed = _split_line(item, n)
        except ConfigError as exc:
            raise ConfigError(f"override {n}: {exc.detail}") from None
        if parsed is None:
            raise ConfigError(f"override {n}: empty override")
        raw[parsed[0]] = (parsed[1], None, "override")

    values = {}
    lines = {}
    for key, (text_value, lineno, _) in raw.items():
        try:
            values[key] = SCHEMA[key].parse(text_value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        lines[key] = lineno
    for key, spec in SCHEMA.items():
        if key in values:
            continue
        if spec.default is REQUIRED:
            raise ConfigError(f"missing required key {key}")
        if spec.default is not OPTIONAL:
            values[key] = spec.default
    _cross_validate(values, lines)
    return ScenarioConfig(values)


def _need(values, lines, key, why):
    if key not in values:
        raise ConfigError(f"missing required key {key} ({why})")


def _cross_validate(values: dict, lines: dict):
    kind = values["source.kind"]
    needs = {
        "solenoid": ("source.turns_per_cm", "source.current_statA"),
        "rotor": ("source.sigma_statC_cm2", "source.omega_rad_s"),
        "whisker": ("source.magnetization_G",),
    }
    for key in needs[kind]:
        _need(values, lines, key, f"source.kind = {kind}")
    for other, keys in needs.items():
        for key in keys:
            if other != kind and key in values and key not in needs[kind]:
                raise ConfigError(f"{key} does not apply to source.kind = {kind}", lines.get(key))
    axis = np.array(values["source.axis"])
    if not np.linalg.norm(axis) > 0:
        raise ConfigError("source.axis must be non-zero", lines.get("source.axis"))
    if values["source.stack_rel_tol"] >= 1e-2:
        raise ConfigError("source.stack_rel_tol must be < 1e-2", lines.get("source.stack_rel_tol"))

    a = values["source.radius_cm"]
    region_radius = values.get("region.radius_cm", 1.001 * a)
    if region_radius <= a:
        raise ConfigError("region.radius_cm must exceed source.radius_cm", lines.get("region.radius_cm"))
    major = values.get("region.major_radius_cm", 2.0 * a)
    minor = values.get("region.minor_radius_cm", 0.5 * a)
    if not minor < major:
        raise ConfigError("region.minor_radius_cm must be < region.major_radius_cm", lines.get("region.minor_radius_cm"))

    path = values["electron.path"]
    if path in ("straight", "arc"):
        _need(values, lines, "electron.impact_parameter_cm", f"electron.path = {path}")
        _need(values, lines, "electron.speed_cm_s", f"electron.path = {path}")
        b = values["electron.impact_parameter_cm"]
        if path == "straight" and not b > region_radius:
            raise ConfigError(
                f"electron.impact_parameter_cm = {b} must exceed the region radius {region_radius}",
                lines.get("electron.impact_parameter_cm"),
            )
    else:
        wp, wt = values["electron.waypoints_cm"], values["electron.waypoint_times_s"]
        if len(wp) < 2 or len(wp) != len(wt):
            raise ConfigError(
                "electron.waypoints_cm needs >= 2 points and as many electron.waypoint_times_s",
                lines.get("electron.waypoints_cm"),
            )
        times = values["electron.times_s"].values()
        if times[0] < wt[0] or times[-1] > wt[-1]:
            raise ConfigError("electron.times_s must lie within the waypoint times", lines.get("electron.times_s"))
    if any(v <= 0 for v in values["scaling.lengths_over_a"]):
        raise ConfigError("scaling.lengths_over_a entries must be > 0", lines.get("scaling.lengths_over_a"))
    c = PRESETS[values["constants.system"]].c
    speed = values.get("electron.speed_cm_s", 0.0)
    if path != "polyline" and not speed < c:
        raise ConfigError(f"electron.speed_cm_s must be below c = {c}", lines.get("electron.speed_cm_s"))


def serialize_config(config: ScenarioConfig) -> str:
    """Text that parses back to ``config`` (same digest)."""
    # empty lists are the default and have no textual form
    return "".join(f"{k} = {_canonical(v)}\n" for k, v in sorted(config.values.items()) if v != ())


def load_config(path: str, overrides=()) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)


__all__ = [
    "ConfigError",
    "SCHEMA",
    "ScenarioConfig",
    "Sweep",
    "fmt_float",
    "load_config",
    "parse_config",
    "serialize_config",
]
