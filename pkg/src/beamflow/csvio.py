"""Delimited text records shared by the CLI and external plotting tools.

Floats are written with 17 significant digits so every file round-trips
exactly through :func:`read_table`.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model import SampleGrid, Swarm

PATTERN_COLUMNS = ("rho", "theta", "magnitude")
ACHIEVED_COLUMNS = ("rho", "theta", "magnitude", "achieved")
TRAJECTORY_COLUMNS = ("t", "m", "a", "alpha", "x", "y", "vx", "vy")
POLAR_COLUMNS = ("theta", "desired", "initial", "final")
EVOLUTION_COLUMNS = ("t", "agent", "amplitude", "phase_mod_2pi")

_INT_COLUMNS = {"m", "agent"}


class CsvFormatError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_table(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path, columns) -> list[tuple]:
    """Read a CSV whose header must equal ``columns``; errors name the offending row."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != tuple(columns):
            raise CsvFormatError(f"{path}: expected header {','.join(columns)}, got {','.join(header)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(columns):
                raise CsvFormatError(f"{path}: row {lineno}: expected {len(columns)} fields, got {len(raw)}")
            try:
                rows.append(
                    tuple(int(v) if c in _INT_COLUMNS else float(v) for c, v in zip(columns, raw))
                )
            except ValueError as exc:
                raise CsvFormatError(f"{path}: row {lineno}: {exc}") from exc
    return rows


def write_pattern(path, grid: SampleGrid, achieved=None) -> None:
    if achieved is None:
        write_table(path, PATTERN_COLUMNS, zip(grid.rho, grid.theta, grid.desired))
    else:
        write_table(path, ACHIEVED_COLUMNS, zip(grid.rho, grid.theta, grid.desired, achieved))


def read_pattern(path) -> SampleGrid:
    rows = read_table(path, PATTERN_COLUMNS)
    if not rows:
        raise CsvFormatError(f"{path}: no samples")
    rho, theta, mag = np.array(rows, dtype=float).T
    return SampleGrid(rho, theta, mag)


def read_achieved(path):
    """Return ``(grid, achieved)`` from a pattern file with an achieved column."""
    rows = read_table(path, ACHIEVED_COLUMNS)
    if not rows:
        raise CsvFormatError(f"{path}: no samples")
    rho, theta, mag, achieved = np.array(rows, dtype=float).T
    return SampleGrid(rho, theta, mag), achieved


def trajectory_rows(samples):
    for snap in samples:
        sw: Swarm = snap.swarm
        wrapped = np.mod(sw.phase, 2.0 * np.pi)
        for m in range(sw.size):
            yield (
                snap.t, m, sw.amplitude[m], wrapped[m],
                sw.position[m, 0], sw.position[m, 1], sw.motion_aux[m, 0], sw.motion_aux[m, 1],
            )


def write_trajectory(path, samples) -> None:
    write_table(path, TRAJECTORY_COLUMNS, trajectory_rows(samples))


def read_trajectory(path) -> list[tuple]:
    return read_table(path, TRAJECTORY_COLUMNS)
