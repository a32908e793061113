"""Readers for peakonlab run artifacts.

The language boundary is the file formats: snapshot blocks (JSON header +
``x,u,ux,y`` rows), trajectory tables (``t,p_i...,q_i...,H,E,M``), long-format
diagnostics (``run_id,functional,params,t,value``) and prediction JSON
(``{"lambdas": [...]}``).  Schema problems are reported with the offending
column.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Input file does not match the documented artifact schema."""


@dataclass
class SnapshotBlock:
    t: float
    x: np.ndarray
    u: np.ndarray
    ux: np.ndarray
    y: np.ndarray
    header: dict


def read_snapshots(path: str | Path) -> list[SnapshotBlock]:
    blocks: list[SnapshotBlock] = []
    header = None
    rows: list[list[float]] = []
    columns: list[str] = []

    def flush():
        nonlocal header, rows
        if header is None:
            return
        for need in ("x", "u", "ux", "y"):
            if need not in columns:
                raise SchemaError(f"{path}: missing column {need!r} in "
                                  f"snapshot block")
        arr = np.asarray(rows, dtype=float)
        col = {name: arr[:, i] for i, name in enumerate(columns)}
        blocks.append(SnapshotBlock(float(header["t"]), col["x"], col["u"],
                                    col["ux"], col["y"], header))
        header, rows = None, []

    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                flush()
                header = json.loads(line[1:])
            elif line[0].isalpha():
                columns = line.split(",")
            else:
                rows.append([float(v) for v in line.split(",")])
    flush()
    if not blocks:
        raise SchemaError(f"{path}: no snapshot blocks found")
    return blocks


@dataclass
class Trajectory:
    t: np.ndarray
    p: np.ndarray  # (samples, N)
    q: np.ndarray
    invariants: dict[str, np.ndarray]


def read_trajectory(path: str | Path) -> Trajectory:
    with open(path) as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or head[0] != "t":
            raise SchemaError(f"{path}: missing column 't' in trajectory header")
        rows = np.asarray([[float(v) for v in r] for r in reader], dtype=float)
    if rows.size == 0:
        raise SchemaError(f"{path}: empty trajectory")
    cols = {name: rows[:, i] for i, name in enumerate(head)}
    n = 0
    while f"q_{n + 1}" in cols:
        n += 1
    if n == 0:
        raise SchemaError(f"{path}: missing column 'q_1'")
    for i in range(1, n + 1):
        if f"p_{i}" not in cols:
            raise SchemaError(f"{path}: missing column 'p_{i}'")
    p = np.column_stack([cols[f"p_{i + 1}"] for i in range(n)])
    q = np.column_stack([cols[f"q_{i + 1}"] for i in range(n)])
    inv = {k: cols[k] for k in ("H", "E", "M") if k in cols}
    return Trajectory(cols["t"], p, q, inv)


@dataclass
class DiagnosticSeries:
    functional: str
    params: dict
    t: np.ndarray
    value: np.ndarray


def read_diagnostics(path: str | Path) -> list[DiagnosticSeries]:
    with open(path) as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        expected = ["run_id", "functional", "params", "t", "value"]
        if head != expected:
            missing = [c for c in expected if head is None or c not in head]
            raise SchemaError(
                f"{path}: missing column {missing[0]!r}" if missing
                else f"{path}: unexpected diagnostics header {head}")
        groups: dict[tuple, list[tuple[float, float]]] = {}
        for row in reader:
            _, functional, params, t, value = row
            groups.setdefault((functional, params), []).append(
                (float(t), float(value)))
    out = []
    for (functional, params), pts in groups.items():
        pts.sort()
        arr = np.asarray(pts)
        out.append(DiagnosticSeries(functional, json.loads(params),
                                    arr[:, 0], arr[:, 1]))
    return out


def read_prediction(path: str | Path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if "lambdas" not in data:
        raise SchemaError(f"{path}: missing field 'lambdas'")
    return np.asarray(data["lambdas"], dtype=float)
