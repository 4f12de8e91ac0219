"""Synthetic reanalysis-style grids with analytically known contents.

Files hold a slab of an hourly time axis ("hours since 2017-01-01 00:00:00"),
a latitude axis running 90 down to -90 and a longitude axis covering
[0, 360).  Any other dimension gets 0..n-1.  Variables are filled from a
closed-form preset so tests can predict every value.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .catalog import format_timestamp, parse_timestamp
from .errors import InvalidParams
from .gridfile import Dimension, FileSchema, Variable, write_grid_file

TIME_UNITS = "hours since 2017-01-01 00:00:00"
PRESETS = ("coord-sum", "constant", "sinusoidal", "coord")


@dataclass(frozen=True)
class VarSpec:
    name: str
    preset: str = "coord-sum"
    arg: str | None = None
    dtype: str = "f64"


def parse_dims(spec: str) -> list[tuple[str, int]]:
    """'time:1,lat:73,lon:144' -> [('time', 1), ('lat', 73), ('lon', 144)]"""
    out = []
    for part in spec.split(","):
        name, _, n = part.strip().partition(":")
        if not name or not n:
            raise InvalidParams(f"bad dimension spec {part!r}; expected name:length")
        length = int(n)
        if length <= 0:
            raise InvalidParams(f"dimension {name} must have positive length")
        out.append((name, length))
    return out


def parse_vars(spec: str, default_preset: str = "coord-sum") -> list[VarSpec]:
    """'sp:constant:7,t,u:sinusoidal' -> VarSpecs; a bare name uses the default preset."""
    out = []
    for part in spec.split(","):
        bits = part.strip().split(":")
        if not bits[0]:
            raise InvalidParams(f"bad variable spec {part!r}")
        preset = bits[1] if len(bits) > 1 else default_preset
        arg = ":".join(bits[2:]) or None
        preset, _, inline = preset.partition("=")
        if inline:
            arg = inline
        if preset not in PRESETS:
            raise InvalidParams(f"unknown fill preset {preset!r}; choose from {', '.join(PRESETS)}")
        out.append(VarSpec(bits[0], preset, arg))
    return out


def axis_values(dim: str, length: int, file_index: int = 0) -> np.ndarray:
    if dim == "time":
        return np.arange(file_index * length, (file_index + 1) * length, dtype=np.float64)
    if dim == "lat":
        return np.linspace(90.0, -90.0, length) if length > 1 else np.array([90.0])
    if dim == "lon":
        return np.arange(length, dtype=np.float64) * (360.0 / length)
    return np.arange(length, dtype=np.float64)


def fill_function(var: VarSpec, dims):
    """Callable mapping broadcast coordinate arrays (in ``dims`` order) to values."""
    if var.preset == "constant":
        c = float(var.arg if var.arg is not None else 0.0)
        return lambda *coords: np.full(np.broadcast_shapes(*(x.shape for x in coords)), c)
    if var.preset == "coord-sum":
        return lambda *coords: sum(np.broadcast_arrays(*coords))
    if var.preset == "coord":
        if var.arg not in dims:
            raise InvalidParams(f"coord preset for {var.name} needs one of {list(dims)}, got {var.arg!r}")
        k = list(dims).index(var.arg)
        return lambda *coords: np.broadcast_arrays(*coords)[k]

    def sinusoidal(*coords):
        coords = dict(zip(dims, np.broadcast_arrays(*coords)))
        out = np.zeros(next(iter(coords.values())).shape)
        for name, x in coords.items():
            if name in ("lat", "lon"):
                out = out + np.sin(np.radians(x))
            else:
                out = out + np.sin(x / 24.0 * 2 * math.pi)
        return out

    return sinusoidal


def file_names(out_dir, n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [os.path.join(out_dir, f"{i:0{width}d}.nc") for i in range(n)]


def generate_fixture(out_dir, dims="time:1,lat:73,lon:144", files: int = 1, variables="sp",
                     fill: str = "coord-sum", version: int = 1) -> list[str]:
    """Write ``files`` grid files into ``out_dir`` and return their paths."""
    dim_list = parse_dims(dims) if isinstance(dims, str) else list(dims)
    var_list = parse_vars(variables, fill) if isinstance(variables, str) else list(variables)
    if files <= 0:
        raise InvalidParams("files must be positive")
    names = [d for d, _ in dim_list]
    clash = {v.name for v in var_list} & set(names)
    if clash:
        raise InvalidParams(f"variables collide with dimension names: {sorted(clash)}")
    variables_ = [
        Variable(d, "f64", (d,), {"units": TIME_UNITS} if d == "time" else {}) for d in names
    ] + [Variable(v.name, v.dtype, tuple(names), {}) for v in var_list]
    schema = FileSchema(tuple(Dimension(d, n) for d, n in dim_list), tuple(variables_),
                        {"title": "gridlight synthetic fixture"})
    fills = {v.name: fill_function(v, names) for v in var_list}
    os.makedirs(out_dir, exist_ok=True)
    paths = file_names(out_dir, files)
    for i, path in enumerate(paths):
        axes = {d: axis_values(d, n, i) for d, n in dim_list}
        write_grid_file(path, schema, axes, fills, version)
    return paths


def hour_timestamp(hour: float) -> str:
    """Text form of a fixture time coordinate (hours since the fixture epoch)."""
    return format_timestamp(parse_timestamp("2017-01-01 00:00:00") + hour * 3600.0)


def write_tabular_fixture(path, hours, lats, lons, value=lambda t, la, lo: la + lo) -> int:
    """CSV with one row per (time, lat, lon) combination; returns the row count.

    Coordinates are written with ``repr`` so they parse back to the exact
    floats used by the grid axes, which keeps equi-joins exact.
    """
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "lat", "lon", "val"])
        for t in hours:
            stamp = hour_timestamp(t)
            for la in lats:
                for lo in lons:
                    w.writerow([stamp, repr(float(la)), repr(float(lo)), repr(float(value(t, la, lo)))])
                    n += 1
    return n
