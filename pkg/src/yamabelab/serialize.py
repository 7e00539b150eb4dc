"""CSV/JSON persistence with deterministic formatting and atomic writes.

CSV bodies are byte-stable for identical inputs: header row, LF endings,
floats printed with 17 significant digits (lossless float64 round trip).
JSON uses sorted keys.  Files are written to a temporary sibling and renamed,
so outputs appear only on success.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import InvalidConfig
from .grid import Grid, Region, build_grid
from .metrics import ConformalMetric, make_metric

__all__ = ["FORMAT_VERSION", "atomic_write_text", "write_json", "write_csv",
           "read_csv", "grid_header", "grid_from_header", "write_field",
           "write_metric", "read_metric", "write_region", "format_float"]

FORMAT_VERSION = 1


def format_float(x: float) -> str:
    return "%.17g" % float(x)


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=False)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_csv(path: str, columns: list, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str):
    with open(path, newline="") as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip()]
    columns = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return columns, rows


def grid_header(grid: Grid) -> dict:
    if grid.mode == "radial":
        return {"mode": "radial", "dimension": grid.dim, "r_max": grid.r_max,
                "node_count": grid.node_count, "stretch": grid.stretch}
    return {"mode": "periodic", "dimension": grid.dim, "box_length": grid.box_length,
            "nodes_per_axis": grid.nodes_per_axis}


def grid_from_header(header: dict) -> Grid:
    return build_grid(dict(header))


def _coord_columns(grid: Grid) -> tuple:
    if grid.mode == "radial":
        return ("r",), grid.r[:, None]
    names = tuple(f"x{i + 1}" for i in range(grid.dim))
    return names, grid.coordinates


def write_field(path_base: str, grid: Grid, values: np.ndarray,
                name: str = "value", extra_header: dict | None = None) -> None:
    """Write one scalar field as <base>.csv plus a <base>.json header."""
    names, coords = _coord_columns(grid)
    columns = ["index", *names, name]
    rows = ((i, *coords[i], float(values[i])) for i in range(grid.node_count))
    write_csv(path_base + ".csv", columns, rows)
    header = {"version": FORMAT_VERSION, "grid": grid_header(grid),
              "rho": "sqrt(1+r^2)" if grid.mode == "radial" else "1"}
    header.update(extra_header or {})
    write_json(path_base + ".json", header)


def write_metric(path_base: str, metric: ConformalMetric,
                 extra_header: dict | None = None) -> None:
    grid = metric.grid
    names, coords = _coord_columns(grid)
    columns = ["index", *names, "psi", "base_curvature", "scalar_curvature"]
    rows = ((i, *coords[i], float(metric.psi[i]), float(metric.base_curvature[i]),
             float(metric.scalar_curvature[i])) for i in range(grid.node_count))
    write_csv(path_base + ".csv", columns, rows)
    header = {"version": FORMAT_VERSION, "grid": grid_header(grid),
              "rho": "sqrt(1+r^2)" if grid.mode == "radial" else "1",
              "base": metric.base, "tau": metric.tau}
    header.update(extra_header or {})
    write_json(path_base + ".json", header)


def read_metric(path_base: str) -> ConformalMetric:
    with open(path_base + ".json") as handle:
        header = json.load(handle)
    grid = grid_from_header(header["grid"])
    columns, rows = read_csv(path_base + ".csv")
    try:
        i_psi = columns.index("psi")
        i_rb = columns.index("base_curvature")
    except ValueError as exc:
        raise InvalidConfig(f"metric file {path_base}.csv misses a column: {exc}")
    psi = np.array([float(row[i_psi]) for row in rows])
    rb = np.array([float(row[i_rb]) for row in rows])
    return make_metric(grid, psi, base=header["base"], base_curvature=rb,
                       tau=header.get("tau"), enforce_decay=False)


def write_region(path_base: str, region: Region) -> None:
    grid = region.grid
    names, coords = _coord_columns(grid)
    mask = region.mask
    columns = ["index", *names, "inside"]
    rows = ((i, *coords[i], int(mask[i])) for i in range(grid.node_count))
    write_csv(path_base + ".csv", columns, rows)
    header = {"version": FORMAT_VERSION, "grid": grid_header(grid)}
    if grid.mode == "radial":
        header["intervals"] = [list(iv) for iv in region.intervals]
    write_json(path_base + ".json", header)
