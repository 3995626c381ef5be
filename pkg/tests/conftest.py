import csv
import io

import pytest

from abfield.cli import run_command
from abfield.config import parse_config

SCALING_CONFIG = """\
# finite solenoid a = 1 cm, electron passing at b = 3 cm
source.kind = solenoid
source.radius_cm = 1.0
source.length_cm = 100
source.turns_per_cm = 100
source.current_statA = 1.0
electron.impact_parameter_cm = 3.0
electron.speed_cm_s = 1e8
electron.times_s = -5e-8:5e-8:3
scaling.lengths_over_a = 25, 50, 100, 200
"""


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    footer = [ln for ln in lines[1:] if ln.startswith("#")]
    return text, lines[0], rows[0], [[float(x) for x in r] for r in rows[1:]], footer


@pytest.fixture(scope="session")
def scaling_run(tmp_path_factory):
    """The cancellation sweep over l/a = 25..200, run once through the CLI layer."""
    out = tmp_path_factory.mktemp("scaling") / "scaling.csv"
    report = run_command("scaling", parse_config(SCALING_CONFIG), str(out))
    return report, read_csv(out)
