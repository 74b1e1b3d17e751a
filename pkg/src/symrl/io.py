"""CSV artifacts.

Every file starts with a ``# symrl <name> schema v<N>`` comment line followed
by a header row. Floats are written with ``repr`` so values round-trip exactly
and reruns are byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, name: str, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# symrl {name} schema v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Header and rows (as string dicts) of a file written by ``write_csv``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# symrl "):
            raise ValueError(f"{path}: missing schema line")
        reader = csv.DictReader(fh)
        rows = list(reader)
    return list(reader.fieldnames or []), rows
