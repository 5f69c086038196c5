"""Georeferenced single-band grids, band stacks and their file formats.

Grids are north-up with square cells.  ``origin_x``/``origin_y`` is the
upper-left corner; row 0 is the northernmost row.

Text format (ESRI ASCII grid)::

    ncols         4
    nrows         3
    xllcorner     500000.0
    yllcorner     6600000.0
    cellsize      16.0
    NODATA_value  -9999
    <nrows lines of ncols values, north to south>

``xllcenter``/``yllcenter`` are accepted on input.  The binary twin starts
with the line ``FORESTAREA-GRID-1``, followed by the same header keys plus
``datatype`` (a numpy dtype string, little-endian) and a terminating ``END``
line; the raw row-major cell values follow immediately.

A band stack is a manifest text file with one ``band_name path`` pair per
line; relative paths resolve against the manifest's directory and ``#``
starts a comment.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError
from ..fileio import atomic_write

BINARY_MAGIC = b"FORESTAREA-GRID-1"
DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GridSpec:
    origin_x: float
    origin_y: float
    cell_size: float
    nrows: int
    ncols: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise InputError("cell size must be > 0")
        if self.nrows < 0 or self.ncols < 0:
            raise InputError("grid dimensions must be >= 0")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def xmax(self) -> float:
        return self.origin_x + self.ncols * self.cell_size

    @property
    def ymin(self) -> float:
        return self.origin_y - self.nrows * self.cell_size

    @property
    def cell_area_km2(self) -> float:
        return self.cell_size * self.cell_size / 1e6

    def centers_x(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.ncols) + 0.5) * self.cell_size

    def centers_y(self) -> np.ndarray:
        return self.origin_y - (np.arange(self.nrows) + 0.5) * self.cell_size

    def contains(self, x: float, y: float) -> bool:
        return self.origin_x <= x <= self.xmax and self.ymin <= y <= self.origin_y

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Row/column of the cell containing (x, y), clamped on the far edges."""
        if not self.contains(x, y):
            raise InputError(f"point ({x}, {y}) outside grid extent")
        col = min(int(math.floor((x - self.origin_x) / self.cell_size)), self.ncols - 1)
        row = min(int(math.floor((self.origin_y - y) / self.cell_size)), self.nrows - 1)
        return row, col


@dataclass
class RasterGrid:
    spec: GridSpec
    values: np.ndarray
    nodata: float | int | None = DEFAULT_NODATA
    legend: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.spec.shape:
            raise InputError(f"values shape {self.values.shape} does not match grid {self.spec.shape}")

    @classmethod
    def from_array(cls, values, origin_x=0.0, origin_y=None, cell_size=1.0, nodata=DEFAULT_NODATA, legend=None):
        values = np.asarray(values)
        nrows, ncols = values.shape
        if origin_y is None:
            origin_y = nrows * cell_size
        return cls(GridSpec(float(origin_x), float(origin_y), float(cell_size), nrows, ncols), values, nodata, legend)

    def valid_mask(self) -> np.ndarray:
        v = self.values
        ok = np.ones(v.shape, dtype=bool)
        if np.issubdtype(v.dtype, np.floating):
            ok &= np.isfinite(v)
        if self.nodata is not None:
            ok &= v != self.nodata
        return ok


@dataclass
class ImageStack:
    """Named bands sharing one grid."""

    spec: GridSpec
    bands: dict[str, np.ndarray]
    nodata: float | None = DEFAULT_NODATA

    def __post_init__(self):
        for name, arr in self.bands.items():
            if arr.shape != self.spec.shape:
                raise InputError(f"band {name!r} shape {arr.shape} does not match grid {self.spec.shape}")

    @property
    def band_names(self) -> list[str]:
        return list(self.bands)

    def band(self, name: str) -> RasterGrid:
        return RasterGrid(self.spec, self.bands[name], self.nodata)

    @classmethod
    def from_grids(cls, grids: dict[str, RasterGrid]) -> ImageStack:
        if not grids:
            raise InputError("empty stack")
        specs = {g.spec for g in grids.values()}
        if len(specs) != 1:
            raise InputError("stack bands do not share a common grid")
        nodatas = {g.nodata for g in grids.values()}
        if len(nodatas) != 1:
            raise InputError("stack bands use different nodata values")
        return cls(specs.pop(), {k: g.values for k, g in grids.items()}, nodatas.pop())


# ---------------------------------------------------------------- text format

def _header_lines(spec: GridSpec, nodata) -> list[str]:
    lines = [
        f"ncols {spec.ncols}",
        f"nrows {spec.nrows}",
        f"xllcorner {spec.origin_x!r}",
        f"yllcorner {spec.ymin!r}",
        f"cellsize {spec.cell_size!r}",
    ]
    if nodata is not None:
        lines.append(f"NODATA_value {nodata!r}" if isinstance(nodata, float) else f"NODATA_value {nodata}")
    return lines


def _parse_header(pairs: dict[str, str], source: str) -> tuple[GridSpec, float | int | None]:
    try:
        ncols = int(pairs["ncols"])
        nrows = int(pairs["nrows"])
        cs = float(pairs["cellsize"])
        if "xllcorner" in pairs:
            x0 = float(pairs["xllcorner"])
        else:
            x0 = float(pairs["xllcenter"]) - cs / 2
        if "yllcorner" in pairs:
            y0 = float(pairs["yllcorner"])
        else:
            y0 = float(pairs["yllcenter"]) - cs / 2
    except KeyError as e:
        raise InputError(f"{source}: missing header key {e.args[0]}") from None
    except ValueError as e:
        raise InputError(f"{source}: bad header value ({e})") from None
    nodata = pairs.get("nodata_value")
    if nodata is not None:
        nodata = float(nodata)
        if nodata.is_integer():
            nodata = int(nodata)
    return GridSpec(x0, y0 + nrows * cs, cs, nrows, ncols), nodata


_HEADER_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value"}


def read_ascii_grid(path, dtype=None) -> RasterGrid:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    pairs = {}
    n_header = 0
    for line in lines:
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in _HEADER_KEYS:
            pairs[parts[0].lower()] = parts[1]
            n_header += 1
        else:
            break
    spec, nodata = _parse_header(pairs, str(path))
    body = " ".join(lines[n_header:])
    try:
        vals = np.array(body.split(), dtype=np.float64)
    except ValueError as e:
        raise InputError(f"{path}: non-numeric cell value ({e})") from None
    if vals.size != spec.nrows * spec.ncols:
        raise InputError(f"{path}: expected {spec.nrows * spec.ncols} values, found {vals.size}")
    vals = vals.reshape(spec.shape)
    if dtype is not None:
        vals = vals.astype(dtype)
    return RasterGrid(spec, vals, nodata)


def format_ascii_grid(grid: RasterGrid) -> str:
    buf = io.StringIO()
    buf.write("\n".join(_header_lines(grid.spec, grid.nodata)) + "\n")
    if np.issubdtype(grid.values.dtype, np.integer) or grid.values.dtype == bool:
        np.savetxt(buf, grid.values.astype(np.int64), fmt="%d")
    else:
        np.savetxt(buf, grid.values, fmt="%.17g")
    return buf.getvalue()


def write_ascii_grid(path, grid: RasterGrid) -> None:
    atomic_write(path, format_ascii_grid(grid))


# -------------------------------------------------------------- binary format

def write_binary_grid(path, grid: RasterGrid) -> None:
    values = np.ascontiguousarray(grid.values)
    dt = values.dtype.newbyteorder("<")
    header = [BINARY_MAGIC.decode(), *_header_lines(grid.spec, grid.nodata), f"datatype {dt.str}", "END"]
    atomic_write(path, ("\n".join(header) + "\n").encode() + values.astype(dt).tobytes())


def read_binary_grid(path) -> RasterGrid:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(BINARY_MAGIC):
        raise InputError(f"{path}: not a binary grid")
    end = raw.find(b"\nEND\n")
    if end < 0:
        raise InputError(f"{path}: unterminated header")
    pairs = {}
    for line in raw[:end].decode().splitlines()[1:]:
        k, v = line.split(None, 1)
        pairs[k.lower()] = v.strip()
    spec, nodata = _parse_header(pairs, str(path))
    dt = np.dtype(pairs.get("datatype", "<f8"))
    data = np.frombuffer(raw, dtype=dt, offset=end + 5)
    if data.size != spec.nrows * spec.ncols:
        raise InputError(f"{path}: expected {spec.nrows * spec.ncols} values, found {data.size}")
    return RasterGrid(spec, data.reshape(spec.shape).astype(dt.newbyteorder("=")), nodata)


def read_grid(path, dtype=None) -> RasterGrid:
    """Read either format, detected from the file's first bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    grid = read_binary_grid(path) if head == BINARY_MAGIC else read_ascii_grid(path)
    if dtype is not None:
        grid.values = grid.values.astype(dtype)
    return grid


def write_grid(path, grid: RasterGrid) -> None:
    """Binary twin for ``.bgrd`` paths, text otherwise."""
    if str(path).endswith(".bgrd"):
        write_binary_grid(path, grid)
    else:
        write_ascii_grid(path, grid)


# ------------------------------------------------------------------ manifests

def read_manifest(path) -> list[tuple[str, Path]]:
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected 'band_name path'")
        name, rel = parts
        p = Path(rel)
        out.append((name, p if p.is_absolute() else path.parent / p))
    if not out:
        raise InputError(f"{path}: manifest lists no bands")
    return out


def read_stack(manifest) -> ImageStack:
    grids = {}
    for name, p in read_manifest(manifest):
        if not p.exists():
            raise InputError(f"{manifest}: band {name!r} file {p} not found")
        grids[name] = read_grid(p)
    return ImageStack.from_grids(grids)


def write_stack(manifest, stack: ImageStack, binary: bool = False) -> None:
    manifest = Path(manifest)
    ext = ".bgrd" if binary else ".asc"
    lines = []
    for name in stack.band_names:
        fname = f"{manifest.stem}_{name}{ext}"
        write_grid(manifest.parent / fname, stack.band(name))
        lines.append(f"{name} {fname}")
    atomic_write(manifest, "\n".join(lines) + "\n")
