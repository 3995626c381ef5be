"""Command-line scenario runner.

    abfield <command> --config <path> --out <path> [--override section.key=value ...]

Commands write one CSV each.  A JSON run report goes to stderr on every run.
Exit codes: 0 success, 2 invalid input, 3 an integral did not converge.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig, fmt_float, load_config
from .core import GeometryError
from .electron import CoincidentPointError
from .energy import back_reaction, cancellation_table, energy_ledger, flux_dependence, poynting_rate
from .phase import BeamPath, PathError, phase_sweep, standard_paths
from .quadrature import QuadratureError, power_law_fit
from .sources import SheetSingularityError, _winding, flux

COMMANDS = ("fields", "energy", "poynting", "phase", "scaling")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

COLUMNS = {
    "energy": ["t_s", "term_external_erg", "term_cross_erg", "term_self_erg", "total_erg", "delta_I_statA"],
    "poynting": ["t_s", "R_full_erg_s", "R_reduced_erg_s", "cross_surface_erg_s"],
    "phase": ["F_gauss_cm2", "phi_rad"],
    "scaling": ["a_over_l", "residual_ratio"],
    "fields": ["x_cm", "y_cm", "z_cm", "B0x", "B0y", "B0z", "Bex", "Bey", "Bez", "Eex", "Eey", "Eez"],
}


@dataclass
class RunReport:
    command: str
    digest: str
    wall_time_s: float = 0.0
    converged: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "digest": self.digest,
                "wall_time_s": round(self.wall_time_s, 6),
                "converged": self.converged,
                "exit_code": self.exit_code,
                "message": self.message,
                "diagnostics": self.diagnostics,
            },
            sort_keys=True,
        )


def _row(values) -> str:
    # adding 0.0 turns -0.0 into 0.0
    return ",".join(fmt_float(float(v) + 0.0) for v in values)


# ---------------------------------------------------------------------------
# commands; each returns (rows, footer lines, report) and never writes files
# ---------------------------------------------------------------------------


def _fields(cfg: ScenarioConfig, report: RunReport):
    source = cfg.source()
    t = cfg.get("fields.time_s", cfg.times[0])
    state = cfg.trajectory().state(t)
    rows = []
    for x in cfg["fields.x_cm"].values():
        for y in cfg["fields.y_cm"].values():
            for z in cfg["fields.z_cm"].values():
                r = np.array([x, y, z])
                rows.append([x, y, z, *source.b0(r), *state.b_field(r), *state.e_field(r)])
    report.converged["fields"] = True
    return rows, []


def _energy(cfg: ScenarioConfig, report: RunReport):
    scen = cfg.scenario()
    source, region = scen.source, scen.region
    rows = []
    ok_ledger, ok_back = True, True
    for t in cfg.times:
        state = scen.state(t)
        br = back_reaction(source, state, scen.spec, region)
        _, current = _winding(source)
        frac = br.delta_I / current if current != 0.0 else 0.0
        led = energy_ledger(source, state, region, scen.spec, time=t, delta_current_fraction=frac, cutoff=scen.electron_cutoff)
        ok_ledger &= led.converged
        ok_back &= br.converged
        rows.append([t, led.term_external, led.term_cross, led.term_self, led.total, br.delta_I])
    report.converged["energy_ledger"] = bool(ok_ledger)
    report.converged["back_reaction"] = bool(ok_back)
    report.diagnostics["back_reaction_applicable"] = br.applicable
    return rows, []


def _poynting(cfg: ScenarioConfig, report: RunReport):
    scen = cfg.scenario()
    rows = []
    ok = True
    mode = cfg["poynting.mode"]
    for t in cfg.times:
        rep = poynting_rate(scen.source, scen.state(t), scen.surface, scen.spec, mode)
        ok &= rep.converged
        rows.append([t, rep.R_full, rep.R_reduced, rep.cross_surface_term])
    report.converged["poynting"] = bool(ok)
    f1 = flux(scen.source)
    if f1 != 0.0:
        dep = flux_dependence(scen, f1, cfg["poynting.flux_ratio"] * f1, cfg.times, mode)
        report.converged["flux_independence"] = dep.converged
        report.diagnostics.update(
            flux_dependence=dep.normalized_difference,
            flux_dependence_bound=dep.bound,
            cross_surface_scale=dep.cross_scale,
        )
    return rows, []


def _phase(cfg: ScenarioConfig, report: RunReport):
    source = cfg.source()
    constants = cfg.constants
    radius = cfg.get("phase.path_radius_cm", 3.0 * source.radius)
    p1, p2 = standard_paths(radius, 0.0, cfg["phase.screen_angle_rad"])
    # place the beams in the source's own frame
    frame = source.frame
    p1 = BeamPath(tuple(tuple(frame.point_to_global(np.array(p))) for p in p1.points), 1)
    p2 = BeamPath(tuple(tuple(frame.point_to_global(np.array(p))) for p in p2.points), 2)
    fluxes = [q * constants.flux_quantum for q in cfg["phase.flux_quanta"].values()]
    pairs = phase_sweep(source, p1, p2, fluxes, cfg["phase.phi0_rad"], constants)
    report.converged["phase"] = True
    return [list(p) for p in pairs], []


def _scaling(cfg: ScenarioConfig, report: RunReport):
    a = cfg["source.radius_cm"]
    scen = cfg.scenario()
    rows_raw = cancellation_table(scen, [x * a for x in cfg["scaling.lengths_over_a"]], cfg.times)
    rows = [[r.a_over_l, r.residual_ratio] for r in rows_raw]
    report.converged["cancellation"] = all(r.converged for r in rows_raw)
    try:
        fit = power_law_fit([(r.a_over_l, r.residual_ratio) for r in rows_raw])
        footer = f"# fit p={fmt_float(fit.exponent)} C={fmt_float(fit.prefactor)} r2={fmt_float(fit.r_squared)}"
    except ValueError as exc:
        footer = "# fit p=nan C=nan r2=nan"
        report.diagnostics["fit"] = str(exc)
    return rows, [footer]


HANDLERS = {"fields": _fields, "energy": _energy, "poynting": _poynting, "phase": _phase, "scaling": _scaling}


def render_csv(command: str, digest: str, rows, footer) -> str:
    buf = io.StringIO()
    buf.write(f"# abfield v1 {command} digest={digest}\n")
    buf.write(",".join(COLUMNS[command]) + "\n")
    for r in rows:
        buf.write(_row(r) + "\n")
    for line in footer:
        buf.write(line + "\n")
    return buf.getvalue()


def run_command(command: str, config: ScenarioConfig, out_path: str) -> RunReport:
    """Run ``command`` for ``config``, write the CSV to ``out_path`` and report."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    report = RunReport(command, config.digest)
    start = time.perf_counter()
    try:
        rows, footer = HANDLERS[command](config, report)
        text = render_csv(command, config.digest, rows, footer)
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if not all(report.converged.values()):
            report.exit_code = EXIT_NONCONVERGED
            failed = sorted(k for k, v in report.converged.items() if not v)
            report.message = "integrals did not converge: " + ", ".join(failed)
    except QuadratureError as exc:
        report.exit_code = EXIT_NONCONVERGED
        report.message = str(exc)
    except (ConfigError, GeometryError, SheetSingularityError, CoincidentPointError, PathError, ValueError, OSError) as exc:
        report.exit_code = EXIT_INVALID
        report.message = f"{type(exc).__name__}: {exc}"
    report.wall_time_s = time.perf_counter() - start
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abfield", description="Magnetic energy and Aharonov-Bohm phase scenarios.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario file (section.key = value lines)")
    parser.add_argument("--out", required=True, help="CSV output path")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="section.key=value",
        help="replace one config value (repeatable)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        report = RunReport(args.command, "", exit_code=EXIT_INVALID, message=str(exc))
        print(f"abfield: {exc}", file=sys.stderr)
        print(report.to_json(), file=sys.stderr)
        return EXIT_INVALID
    report = run_command(args.command, cfg, args.out)
    if report.message:
        print(f"abfield: {report.message}", file=sys.stderr)
    print(report.to_json(), file=sys.stderr)
    return report.exit_code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
