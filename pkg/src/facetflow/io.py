"""Field serialisation, named data presets and run-summary output."""

import json
import math
import re
from pathlib import Path

import numpy as np

from .grid import Grid

_HEADER = re.compile(r"#\s*nx=(\d+)\s+ny=(\d+)\s+lx=(\S+)\s+ly=(\S+)\s*$")


class FieldFormatError(ValueError):
    """A field file is malformed, non-finite or does not match the grid."""


def field_header(grid):
    return f"# nx={grid.nx} ny={grid.ny} lx={grid.lx!r} ly={grid.ly!r}"


def dump_field(field, path, grid):
    """Write ``field`` as CSV, one row per y index, 17 significant digits."""
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise FieldFormatError(f"field shape {field.shape} does not match grid {grid.shape}")
    lines = [field_header(grid)]
    lines.extend(",".join(f"{x:.17g}" for x in row) for row in field)
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path, grid):
    """Read a CSV field written by :func:`dump_field` and check it against ``grid``."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise FieldFormatError(f"{path}: empty file")
    m = _HEADER.match(lines[0].strip())
    if m is None:
        raise FieldFormatError(f"{path}: missing or malformed header line")
    nx, ny = int(m.group(1)), int(m.group(2))
    lx, ly = float(m.group(3)), float(m.group(4))
    if (nx, ny) != (grid.nx, grid.ny):
        raise FieldFormatError(f"{path}: header says {nx}x{ny}, grid is {grid.nx}x{grid.ny}")
    if not (math.isclose(lx, grid.lx, rel_tol=1e-12) and math.isclose(ly, grid.ly, rel_tol=1e-12)):
        raise FieldFormatError(f"{path}: header domain {lx}x{ly} differs from {grid.lx}x{grid.ly}")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != ny:
        raise FieldFormatError(f"{path}: expected {ny} rows, found {len(rows)}")
    cells = [row.split(",") for row in rows]
    widths = sorted({len(c) for c in cells})
    if widths != [nx]:
        raise FieldFormatError(f"{path}: ragged rows or wrong column count (widths {widths}, expected {nx})")
    try:
        data = np.array([[float(x) for x in c] for c in cells])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(data)):
        raise FieldFormatError(f"{path}: field contains non-finite values")
    return data


# ------------------------------------------------------------------ presets


def _unit_coords(grid):
    X, Y = grid.cell_centers()
    return X / grid.lx, Y / grid.ly


def _constant(grid, value):
    return grid.full(value)


def _gaussian_bump(grid, amplitude=1.0, width=0.15, x0=0.5, y0=0.5, offset=0.0):
    # width and centre are fractions of the domain side lengths
    x, y = _unit_coords(grid)
    return offset + amplitude * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * width**2))


def _cosine_ridge(grid, amplitude=1.0, offset=0.0):
    # ridge along y, crest at x = lx/2, zero slope at both x-walls
    x, _ = _unit_coords(grid)
    return offset + 0.5 * amplitude * (1 - np.cos(2 * np.pi * x))


def _two_facet_ramp(grid, amplitude=1.0, low_edge=0.3, high_edge=0.7, offset=0.0):
    x, _ = _unit_coords(grid)
    return offset + amplitude * np.clip((x - low_edge) / (high_edge - low_edge), 0.0, 1.0)


PRESETS = {
    "constant": (_constant, {"value"}),
    "gaussian-bump": (_gaussian_bump, {"amplitude", "width", "x0", "y0", "offset"}),
    "cosine-ridge": (_cosine_ridge, {"amplitude", "offset"}),
    "two-facet-ramp": (_two_facet_ramp, {"amplitude", "low_edge", "high_edge", "offset"}),
}


def preset_field(name, grid, **options):
    """Evaluate a named preset on the cell centres of ``grid``."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    func, allowed = PRESETS[name]
    unknown = set(options) - allowed
    if unknown:
        raise ValueError(f"preset {name!r} does not take {sorted(unknown)}")
    if name == "constant" and "value" not in options:
        raise ValueError("preset 'constant' needs a value")
    if name == "two-facet-ramp":
        lo, hi = options.get("low_edge", 0.3), options.get("high_edge", 0.7)
        if not 0 <= lo < hi <= 1:
            raise ValueError("two-facet-ramp needs 0 <= low_edge < high_edge <= 1")
    if name == "gaussian-bump" and not options.get("width", 0.15) > 0:
        raise ValueError("gaussian-bump width must be > 0")
    return func(grid, **options)


# ------------------------------------------------------------------ summaries


def _plain(obj):
    # JSON cannot carry inf/nan; numpy scalars need unwrapping
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_summary(summary, path):
    """Write a nested mapping as JSON with sorted keys and a trailing newline."""
    text = json.dumps(_plain(summary), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def grid_from_header(path):
    """Build the :class:`Grid` a field file declares in its header."""
    with open(path) as fh:
        first = fh.readline()
    m = _HEADER.match(first.strip())
    if m is None:
        raise FieldFormatError(f"{path}: missing or malformed header line")
    return Grid(int(m.group(1)), int(m.group(2)), float(m.group(3)), float(m.group(4)))
