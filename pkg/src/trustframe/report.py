"""Write a simulation report to disk as plot-ready tables.

Each CSV starts with a ``# seed=<n>`` comment line followed by a fixed
header row; read them with ``pandas.read_csv(path, comment="#")`` or skip
the first line.  Floats are written with ``repr`` so values round-trip.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .simulation import SimulationReport

TRUST_HEADER = ("round", "node_id", "cluster_id", "rolling_average", "count", "is_coordinator")
TASK_HEADER = ("round", "task_id", "cluster_id", "status", "workers", "coordinator", "partner", "bootstrap", "detail")
FILES = ("trust_timeseries.csv", "task_log.csv", "summary.json")


def _write_csv(path: Path, seed: int, header, rows) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_bundle(report: SimulationReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in FILES}
    _write_csv(paths["trust_timeseries.csv"], report.seed, TRUST_HEADER, report.trust_rows)
    _write_csv(
        paths["task_log.csv"],
        report.seed,
        TASK_HEADER,
        (
            (t.round, t.task_id, t.cluster_id, t.status, ";".join(t.workers), t.coordinator, t.partner, t.bootstrap, t.detail)
            for t in report.task_log
        ),
    )
    paths["summary.json"].write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    return paths


def read_table(path: str | Path) -> list[dict[str, str]]:
    """Rows of a bundle CSV as dicts of strings, seed comment skipped."""
    with Path(path).open(newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
