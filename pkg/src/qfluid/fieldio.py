"""CSV serialization of grid fields.

One row per grid point in flat C order:

    index,x[,y],value[,value_imag]

preceded by a single header comment line

    # grid: dims,extent,points,origin

with per-axis entries joined by ';'. Floats are written with repr, the
shortest round-trip form, so identical fields serialize to identical bytes.
Vector fields are written as one file per component (the row schema carries
a single value column).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grids import GridSpec, ScalarField, VectorField, WaveField

__all__ = [
    "write_field_csv",
    "read_field_csv",
    "write_vector_csv",
    "vector_component_paths",
]


def _fmt(v: float) -> str:
    return repr(float(v))


def _header(grid: GridSpec) -> str:
    ext = ";".join(_fmt(e) for e in grid.extent)
    pts = ";".join(str(p) for p in grid.points)
    org = ";".join(_fmt(o) for o in grid.origin)
    return f"# grid: {grid.dims},{ext},{pts},{org}"


def _parse_header(line: str) -> GridSpec:
    if not line.startswith("# grid:"):
        raise ConfigError(f"missing grid header, got {line!r}")
    body = line.split(":", 1)[1].strip()
    dims_s, ext_s, pts_s, org_s = body.split(",")
    dims = int(dims_s)
    extent = tuple(float(v) for v in ext_s.split(";"))
    points = tuple(int(v) for v in pts_s.split(";"))
    origin = tuple(float(v) for v in org_s.split(";"))
    if not (len(extent) == len(points) == len(origin) == dims):
        raise ConfigError("grid header fields disagree on dimensionality")
    return GridSpec(extent=extent, points=points, origin=origin)


def write_field_csv(field: ScalarField | WaveField, path) -> Path:
    """Write a scalar or wave field; wave fields carry a value_imag column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    complex_valued = isinstance(field, WaveField)
    axes = grid.meshgrid() if grid.dims == 2 else [grid.axis(0)]
    coords = [ax.ravel() for ax in axes]
    flat = field.values.ravel()
    with open(path, "w", newline="") as fh:
        fh.write(_header(grid) + "\n")
        writer = csv.writer(fh)
        for i in range(flat.size):
            row = [str(i)] + [_fmt(c[i]) for c in coords]
            if complex_valued:
                row += [_fmt(flat[i].real), _fmt(flat[i].imag)]
            else:
                row.append(_fmt(flat[i]))
            writer.writerow(row)
    return path


def read_field_csv(path) -> ScalarField | WaveField:
    """Read a field written by write_field_csv, restoring grid and type."""
    path = Path(path)
    with open(path, newline="") as fh:
        grid = _parse_header(fh.readline().rstrip("\n"))
        rows = list(csv.reader(fh))
    expected = grid.size
    if len(rows) != expected:
        raise ConfigError(f"expected {expected} rows, found {len(rows)}")
    n_coord = grid.dims
    width = len(rows[0])
    complex_valued = width == 1 + n_coord + 2
    values = np.empty(expected, dtype=complex if complex_valued else float)
    for i, row in enumerate(rows):
        if int(row[0]) != i:
            raise ConfigError(f"row index {row[0]} out of order at line {i}")
        if complex_valued:
            values[i] = float(row[1 + n_coord]) + 1j * float(row[2 + n_coord])
        else:
            values[i] = float(row[1 + n_coord])
    values = values.reshape(grid.shape)
    if complex_valued:
        return WaveField(grid, values)
    return ScalarField(grid, values.real)


def vector_component_paths(path) -> list[Path]:
    """Sibling per-component file names for a vector field dump."""
    path = Path(path)
    return [
        path.with_name(f"{path.stem}_{axis}{path.suffix}")
        for axis in ("x", "y")
    ]


def write_vector_csv(field: VectorField, path) -> list[Path]:
    """Write one scalar CSV per component, suffixed _x (and _y in 2D)."""
    paths = vector_component_paths(path)[: field.grid.dims]
    for i, comp_path in enumerate(paths):
        write_field_csv(field.component(i), comp_path)
    return paths
