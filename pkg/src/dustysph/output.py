"""Snapshots and their CSV form.

Each snapshot holds one table per phase with columns
``phase, x, rho, v, e, p, t_stop`` restricted to the region of interest and
sorted by ``x``.  Files start with a single comment line
``# time=..., preset=..., columns=...``; floats are written with ``repr`` so
identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

import numpy as np

COLUMNS = ("phase", "x", "rho", "v", "e", "p", "t_stop")


@dataclass
class Snapshot:
    time: float
    step: int
    preset: str
    tables: Dict[str, np.ndarray]     # phase name -> (n, 6) float array of x..t_stop
    masses: Dict[str, float]
    total_mass: Dict[str, float]      # all particles, ghosts included

    @property
    def phases(self):
        return list(self.tables)

    def column(self, phase, name):
        return self.tables[phase][:, COLUMNS.index(name) - 1]


def phase_name(role):
    return "gas" if role == "gas" else f"dust{int(role) + 1}"


def take_snapshot(state, region=None) -> Snapshot:
    lo, hi = region or state.region
    tables, masses, totals = {}, {}, {}
    for ps in state.phases:
        sel = (ps.x >= lo) & (ps.x <= hi) & ps.active
        n = int(sel.sum())
        nan = np.full(n, np.nan)
        e = ps.e[sel] if ps.e is not None else nan
        p = ps.p[sel] if ps.p is not None else nan
        t = ps.t_stop[sel] if ps.t_stop is not None else nan
        cols = np.column_stack([ps.x[sel], ps.rho[sel], ps.v[sel], e, p, t]) if n else np.empty((0, 6))
        order = np.argsort(cols[:, 0], kind="stable")
        name = phase_name(ps.role)
        tables[name] = cols[order]
        masses[name] = float(ps.mass)
        totals[name] = float(ps.mass * len(ps))
    return Snapshot(float(state.time), int(state.step_index), state.name, tables, masses, totals)


def _fmt(v):
    return repr(float(v))


def snapshot_csv(snap: Snapshot, phase: str) -> str:
    buf = io.StringIO()
    buf.write(f"# time={_fmt(snap.time)}, preset={snap.preset}, columns={','.join(COLUMNS)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in snap.tables[phase]:
        w.writerow([phase] + [_fmt(v) for v in row])
    return buf.getvalue()


def write_snapshot(snap: Snapshot, out_dir, index: int):
    """Write one CSV per phase; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for phase in snap.phases:
        path = out_dir / f"snap_{index:04d}_{phase}.csv"
        path.write_text(snapshot_csv(snap, phase))
        paths.append(path)
    return paths


def read_snapshot_csv(path):
    """Return ``(header dict, phase, array)`` from a file written above."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing comment header")
    head = {}
    for part in text[0][1:].split(", "):
        key, _, val = part.strip().partition("=")
        head[key] = val
    head["time"] = float(head["time"])
    rows = list(csv.reader(text[2:]))
    phase = rows[0][0] if rows else os.path.basename(str(path)).rsplit("_", 1)[-1][:-4]
    data = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(-1, len(COLUMNS) - 1)
    return head, phase, data


def write_series_csv(path, columns, rows, header=""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path
