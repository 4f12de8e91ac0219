"""Reader and writer for the NetCDF classic (CDF-1 / CDF-2) binary format.

Only the subset needed by the engine is supported: fixed-size and record
variables of the six classic element types, dimension / attribute lists,
and positional subarray reads.  Compression, groups and the HDF5-based
NetCDF-4 container are not handled.

Layout reference (all integers big-endian)::

    header  = magic numrecs dim_list gatt_list var_list
    magic   = 'C' 'D' 'F' (1 | 2)
    var     = name ndims [dimid ...] vatt_list nc_type vsize begin

``begin`` is 32 bit for CDF-1 and 64 bit for CDF-2.
"""

from __future__ import annotations

import itertools
import math
import os
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    InvalidSchema,
    IoFailure,
    NoCoordinateVariable,
    NonMonotonicAxis,
    OutOfBounds,
    TruncatedHeader,
    UnknownVariable,
    UnsupportedFeature,
)

NC_DIMENSION = 0x0A
NC_VARIABLE = 0x0B
NC_ATTRIBUTE = 0x0C

NC_BYTE = 1
NC_CHAR = 2
NC_SHORT = 3
NC_INT = 4
NC_FLOAT = 5
NC_DOUBLE = 6

STREAMING = 0xFFFFFFFF

TYPE_TAGS = {"i8": NC_BYTE, "char": NC_CHAR, "i16": NC_SHORT, "i32": NC_INT, "f32": NC_FLOAT, "f64": NC_DOUBLE}
TAG_TYPES = {v: k for k, v in TYPE_TAGS.items()}
DTYPES = {
    "i8": np.dtype(">i1"),
    "char": np.dtype("S1"),
    "i16": np.dtype(">i2"),
    "i32": np.dtype(">i4"),
    "f32": np.dtype(">f4"),
    "f64": np.dtype(">f8"),
}
NUMERIC_TYPES = ("i8", "i16", "i32", "f32", "f64")


def _pad4(n: int) -> int:
    return (n + 3) & ~3


@dataclass(frozen=True)
class Dimension:
    name: str
    length: int  # 0 marks the record dimension

    @property
    def is_record(self) -> bool:
        return self.length == 0


@dataclass(frozen=True)
class Variable:
    name: str
    dtype: str
    dims: tuple[str, ...]
    attributes: dict = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class FileSchema:
    dimensions: tuple[Dimension, ...] = ()
    variables: tuple[Variable, ...] = ()
    attributes: dict = field(default_factory=dict, hash=False)

    def dimension(self, name: str) -> Dimension:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariable(name)

    def has_variable(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    @property
    def record_dimension(self) -> Dimension | None:
        for d in self.dimensions:
            if d.is_record:
                return d
        return None

    def coordinate_variable(self, dim: str) -> Variable | None:
        for v in self.variables:
            if v.name == dim and v.dims == (dim,):
                return v
        return None

    def validate(self) -> None:
        """Raise InvalidSchema unless the schema satisfies the format rules."""
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise InvalidSchema(f"duplicate dimension names in {names}")
        vnames = [v.name for v in self.variables]
        if len(set(vnames)) != len(vnames):
            raise InvalidSchema(f"duplicate variable names in {vnames}")
        records = [d.name for d in self.dimensions if d.is_record]
        if len(records) > 1:
            raise InvalidSchema(f"more than one record dimension: {records}")
        for d in self.dimensions:
            if d.length < 0:
                raise InvalidSchema(f"negative length for dimension {d.name}")
        for v in self.variables:
            if v.dtype not in TYPE_TAGS:
                raise InvalidSchema(f"unknown element type {v.dtype!r} for {v.name}")
            for i, dn in enumerate(v.dims):
                if dn not in names:
                    raise InvalidSchema(f"variable {v.name} references undeclared dimension {dn}")
                if dn in records and i != 0:
                    raise InvalidSchema(f"record dimension {dn} must be the first dimension of {v.name}")


@dataclass(frozen=True)
class CoordinateAxis:
    dim_name: str
    values: np.ndarray
    direction: str  # "ascending" | "descending"

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, dim_name: str, values) -> "CoordinateAxis":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise NonMonotonicAxis(f"{dim_name}: axis must be one-dimensional")
        if len(values) < 2:
            return cls(dim_name, values, "ascending")
        direction = "ascending" if values[1] > values[0] else "descending"
        steps = np.diff(values)
        ok = np.all(steps > 0) if direction == "ascending" else np.all(steps < 0)
        if not ok:
            raise NonMonotonicAxis(f"{dim_name}: values are not strictly monotonic")
        return cls(dim_name, values, direction)


@dataclass(frozen=True)
class GridFileHandle:
    path: str
    header: FileSchema
    numrec: int
    data_offsets: dict
    version: int = 1
    recsize: int = 0

    def shape(self, var: str) -> tuple[int, ...]:
        v = self.header.variable(var)
        return tuple(self.dim_length(d) for d in v.dims)

    def dim_length(self, dim: str) -> int:
        d = self.header.dimension(dim)
        return self.numrec if d.is_record else d.length

    def is_record_variable(self, var: str) -> bool:
        v = self.header.variable(var)
        rec = self.header.record_dimension
        return bool(v.dims) and rec is not None and v.dims[0] == rec.name


class IoCounter:
    """Thread-safe tally of variable bytes fetched from disk."""

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_read = 0
        self.reads = 0
        self.by_variable: dict[str, int] = {}

    def add(self, var: str, nbytes: int) -> None:
        with self._lock:
            self.bytes_read += nbytes
            self.reads += 1
            self.by_variable[var] = self.by_variable.get(var, 0) + nbytes


# ---------------------------------------------------------------- header parse


class _Cursor:
    def __init__(self, buf: bytes, complete: bool):
        self.buf = buf
        self.pos = 0
        self.complete = complete

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise TruncatedHeader(f"header ends after {len(self.buf)} bytes, needed {end}")
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def name(self) -> str:
        n = self.u32()
        raw = self.take(_pad4(n))[:n]
        return raw.decode("utf-8")


def _read_attrs(cur: _Cursor) -> dict:
    tag = cur.u32()
    n = cur.u32()
    if tag == 0 and n == 0:
        return {}
    if tag != NC_ATTRIBUTE:
        raise TruncatedHeader(f"expected attribute list tag, got {tag:#x}")
    attrs = {}
    for _ in range(n):
        name = cur.name()
        type_tag = cur.u32()
        if type_tag not in TAG_TYPES:
            raise UnsupportedFeature(f"attribute {name}: unknown type tag {type_tag}")
        nelems = cur.u32()
        dt = DTYPES[TAG_TYPES[type_tag]]
        raw = cur.take(_pad4(nelems * dt.itemsize))[: nelems * dt.itemsize]
        attrs[name] = _decode_attr(type_tag, raw, nelems)
    return attrs


def _decode_attr(type_tag: int, raw: bytes, nelems: int):
    if type_tag == NC_CHAR:
        return raw.decode("utf-8", errors="replace")
    arr = np.frombuffer(raw, dtype=DTYPES[TAG_TYPES[type_tag]], count=nelems)
    vals = tuple(v.item() for v in arr)
    return vals[0] if nelems == 1 else vals


def _parse_header(path: str, buf: bytes, complete: bool, filesize: int) -> GridFileHandle:
    cur = _Cursor(buf, complete)
    magic = cur.take(4) if len(buf) >= 4 else b""
    if len(magic) < 4 or magic[:3] != b"CDF":
        raise BadMagic(f"{path}: not a NetCDF classic file (magic {bytes(buf[:4])!r})")
    version = magic[3]
    if version not in (1, 2):
        raise UnsupportedFeature(f"{path}: format version {version} not supported (only CDF-1/CDF-2)")
    numrec = cur.u32()

    tag, n = cur.u32(), cur.u32()
    dims: list[Dimension] = []
    if not (tag == 0 and n == 0):
        if tag != NC_DIMENSION:
            raise TruncatedHeader(f"{path}: expected dimension list tag, got {tag:#x}")
        for _ in range(n):
            dims.append(Dimension(cur.name(), cur.u32()))
    gattrs = _read_attrs(cur)

    tag, n = cur.u32(), cur.u32()
    variables: list[Variable] = []
    offsets: dict[str, int] = {}
    vsizes: dict[str, int] = {}
    if not (tag == 0 and n == 0):
        if tag != NC_VARIABLE:
            raise TruncatedHeader(f"{path}: expected variable list tag, got {tag:#x}")
        for _ in range(n):
            name = cur.name()
            ndims = cur.u32()
            dimids = [cur.u32() for _ in range(ndims)]
            for i in dimids:
                if i >= len(dims):
                    raise InvalidSchema(f"{path}: variable {name} references dimension id {i}")
            vattrs = _read_attrs(cur)
            type_tag = cur.u32()
            if type_tag not in TAG_TYPES:
                raise UnsupportedFeature(f"{path}: variable {name} has unknown type tag {type_tag}")
            vsizes[name] = cur.u32()
            offsets[name] = cur.u32() if version == 1 else cur.u64()
            variables.append(Variable(name, TAG_TYPES[type_tag], tuple(dims[i].name for i in dimids), vattrs))

    schema = FileSchema(tuple(dims), tuple(variables), gattrs)
    schema.validate()

    rec = schema.record_dimension
    rec_vars = [v for v in variables if rec is not None and v.dims and v.dims[0] == rec.name]
    if len(rec_vars) == 1:
        v = rec_vars[0]
        # a lone record variable is stored without inter-record padding
        recsize = math.prod(_fixed_len(schema, dn) for dn in v.dims[1:]) * DTYPES[v.dtype].itemsize
    else:
        recsize = sum(vsizes[v.name] for v in rec_vars)
    if numrec == STREAMING:
        if rec_vars and recsize:
            first = min(offsets[v.name] for v in rec_vars)
            numrec = max(0, (filesize - first) // recsize)
        else:
            numrec = 0
    return GridFileHandle(path, schema, numrec, offsets, version, recsize)


def _fixed_len(schema: FileSchema, dim: str) -> int:
    return schema.dimension(dim).length


def open_grid_file(path) -> GridFileHandle:
    """Parse the header of a classic file; variable data is not touched."""
    path = os.fspath(path)
    try:
        size = os.path.getsize(path)
        chunk = min(size, 1 << 16)
        with open(path, "rb") as fh:
            while True:
                fh.seek(0)
                buf = fh.read(chunk)
                try:
                    return _parse_header(path, buf, chunk >= size, size)
                except TruncatedHeader:
                    if chunk >= size:
                        raise
                    chunk = min(size, chunk * 4)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- data access


def read_axis(handle: GridFileHandle, dim: str) -> CoordinateAxis:
    var = handle.header.coordinate_variable(dim)
    if var is None or var.dtype == "char":
        raise NoCoordinateVariable(f"{handle.path}: dimension {dim!r} has no coordinate variable")
    values = read_variable(handle, dim)
    return CoordinateAxis.from_values(dim, values)


def read_variable(handle: GridFileHandle, var: str, counter: IoCounter | None = None) -> np.ndarray:
    shape = handle.shape(var)
    return _read(handle, var, [0] * len(shape), list(shape), counter)


def read_subarray(handle: GridFileHandle, var: str, block, counter: IoCounter | None = None) -> np.ndarray:
    """Read the inclusive positional box ``block`` (``.start`` / ``.end``) of ``var``.

    The result has shape ``end - start + 1`` per dimension.
    """
    if not handle.header.has_variable(var):
        raise UnknownVariable(f"{handle.path}: no variable {var!r}")
    shape = handle.shape(var)
    start = [int(s) for s in block.start]
    end = [int(e) for e in block.end]
    if len(start) != len(shape) or len(end) != len(shape):
        raise OutOfBounds(f"block rank {len(start)} does not match rank {len(shape)} of {var}")
    for k, (s, e, n) in enumerate(zip(start, end, shape)):
        if s < 0 or e >= n or s > e:
            raise OutOfBounds(f"{var}: block [{s},{e}] outside dimension {k} of length {n}")
    counts = [e - s + 1 for s, e in zip(start, end)]
    return _read(handle, var, start, counts, counter)


def _read(handle: GridFileHandle, var: str, start, counts, counter) -> np.ndarray:
    v = handle.header.variable(var)
    dt = DTYPES[v.dtype]
    shape = handle.shape(var)
    begin = handle.data_offsets[var]
    total = math.prod(counts)
    out = np.empty(total, dtype=dt)
    if total == 0:
        return out.reshape(counts)

    if handle.is_record_variable(var):
        slabs = [begin + r * handle.recsize for r in range(start[0], start[0] + counts[0])]
        inner_shape, inner_start, inner_counts = shape[1:], start[1:], counts[1:]
    else:
        slabs = [begin]
        inner_shape, inner_start, inner_counts = shape, start, counts

    runs = list(_runs(inner_shape, inner_start, inner_counts, dt.itemsize))
    try:
        fd = os.open(handle.path, os.O_RDONLY)
    except OSError as exc:
        raise IoFailure(f"{handle.path}: {exc}") from exc
    try:
        pos = 0
        raw = out.view(np.uint8)
        for base in slabs:
            for offset, nbytes in runs:
                data = os.pread(fd, nbytes, base + offset)
                if len(data) != nbytes:
                    raise IoFailure(f"{handle.path}: short read of {var}")
                raw[pos:pos + nbytes] = np.frombuffer(data, dtype=np.uint8)
                pos += nbytes
    finally:
        os.close(fd)
    if counter is not None:
        counter.add(var, total * dt.itemsize)
    native = out if dt.kind == "S" else out.astype(dt.newbyteorder("="))
    return native.reshape(counts)


def _runs(shape, start, counts, itemsize):
    """Yield (byte offset, byte length) of the contiguous runs covering a box."""
    nd = len(shape)
    if nd == 0:
        yield 0, itemsize
        return
    # innermost dimension j such that every dimension after j is read in full
    j = nd - 1
    while j > 0 and counts[j] == shape[j] and start[j] == 0:
        j -= 1
    strides = [math.prod(shape[k + 1:]) for k in range(nd)]
    run = counts[j] * strides[j]
    outer = [range(start[k], start[k] + counts[k]) for k in range(j)]
    for idx in itertools.product(*outer):
        lin = sum(i * strides[k] for k, i in enumerate(idx)) + start[j] * strides[j]
        yield lin * itemsize, run * itemsize


# ---------------------------------------------------------------- writer


def _encode_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw + b"\0" * (_pad4(len(raw)) - len(raw))


def _attr_payload(value) -> tuple[int, int, bytes]:
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return NC_CHAR, len(raw), raw
    if isinstance(value, np.ndarray) or isinstance(value, np.generic):
        arr = np.atleast_1d(value)
        kind = {np.dtype("int8"): "i8", np.dtype("int16"): "i16", np.dtype("int32"): "i32",
                np.dtype("float32"): "f32", np.dtype("float64"): "f64"}.get(arr.dtype.newbyteorder("="))
        if kind is None:
            raise InvalidSchema(f"unsupported attribute dtype {arr.dtype}")
        return TYPE_TAGS[kind], arr.size, arr.astype(DTYPES[kind]).tobytes()
    vals = list(value) if isinstance(value, (list, tuple)) else [value]
    if all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in vals):
        if any(not -(2**31) <= int(x) < 2**31 for x in vals):
            raise InvalidSchema(f"integer attribute value out of i32 range: {value!r}")
        return NC_INT, len(vals), np.asarray(vals, dtype=">i4").tobytes()
    if all(isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool) for x in vals):
        return NC_DOUBLE, len(vals), np.asarray(vals, dtype=">f8").tobytes()
    raise InvalidSchema(f"unsupported attribute value {value!r}")


def _encode_attrs(attrs: Mapping) -> bytes:
    if not attrs:
        return b"\0" * 8
    out = [struct.pack(">II", NC_ATTRIBUTE, len(attrs))]
    for name, value in attrs.items():
        tag, nelems, raw = _attr_payload(value)
        out.append(_encode_name(name))
        out.append(struct.pack(">II", tag, nelems))
        out.append(raw + b"\0" * (_pad4(len(raw)) - len(raw)))
    return b"".join(out)


def _encode_header(schema: FileSchema, offsets: Sequence[int], vsizes: Sequence[int], version: int) -> bytes:
    out = [b"CDF" + bytes([version]), struct.pack(">I", 0)]
    if schema.dimensions:
        out.append(struct.pack(">II", NC_DIMENSION, len(schema.dimensions)))
        for d in schema.dimensions:
            out.append(_encode_name(d.name) + struct.pack(">I", d.length))
    else:
        out.append(b"\0" * 8)
    out.append(_encode_attrs(schema.attributes))
    if schema.variables:
        ids = {d.name: i for i, d in enumerate(schema.dimensions)}
        out.append(struct.pack(">II", NC_VARIABLE, len(schema.variables)))
        for v, off, vsize in zip(schema.variables, offsets, vsizes):
            out.append(_encode_name(v.name))
            out.append(struct.pack(">I", len(v.dims)))
            out.extend(struct.pack(">I", ids[d]) for d in v.dims)
            out.append(_encode_attrs(v.attributes))
            out.append(struct.pack(">II", TYPE_TAGS[v.dtype], min(vsize, 2**32 - 1)))
            out.append(struct.pack(">I" if version == 1 else ">Q", off))
    else:
        out.append(b"\0" * 8)
    return b"".join(out)


def _variable_data(var: Variable, schema: FileSchema, axes: Mapping, fill: Mapping) -> np.ndarray:
    shape = tuple(schema.dimension(d).length for d in var.dims)
    dt = DTYPES[var.dtype]
    if var.dims == (var.name,) and var.name in axes:
        values = _axis_values(axes[var.name])
        if len(values) != shape[0]:
            raise InvalidSchema(f"axis {var.name} has {len(values)} values, dimension length {shape[0]}")
        data = np.asarray(values)
    else:
        if var.name not in fill:
            raise InvalidSchema(f"no fill function for variable {var.name}")
        coords = []
        for k, dn in enumerate(var.dims):
            vals = _axis_values(axes[dn]) if dn in axes else np.arange(shape[k], dtype=np.float64)
            if len(vals) != shape[k]:
                raise InvalidSchema(f"axis {dn} has {len(vals)} values, dimension length {shape[k]}")
            idx = [1] * len(shape)
            idx[k] = shape[k]
            coords.append(np.asarray(vals, dtype=np.float64).reshape(idx))
        data = fill[var.name](*coords)
    if var.dtype == "char":
        if isinstance(data, str):
            data = data.encode("utf-8")
        if isinstance(data, bytes):
            buf = data[: math.prod(shape)].ljust(math.prod(shape), b"\0")
            data = np.frombuffer(buf, dtype="S1")
        return np.broadcast_to(np.asarray(data, dtype="S1"), shape)
    data = np.broadcast_to(np.asarray(data, dtype=np.float64), shape)
    if var.dtype in ("i8", "i16", "i32"):
        data = np.rint(data)
    return data.astype(dt)


def _axis_values(axis) -> np.ndarray:
    return axis.values if isinstance(axis, CoordinateAxis) else np.asarray(axis, dtype=np.float64)


def write_grid_file(path, schema: FileSchema, axes: Mapping | None = None,
                    fill: Mapping[str, Callable] | None = None, version: int = 1) -> None:
    """Write ``schema`` as a classic file.

    Coordinate variables take their values from ``axes``; every other variable
    ``v`` is filled with ``fill[v](*coords)`` where ``coords`` are the
    variable's coordinate arrays, broadcastable against its shape.
    """
    axes = dict(axes or {})
    fill = dict(fill or {})
    schema.validate()
    if version not in (1, 2):
        raise InvalidSchema(f"cannot write format version {version}")
    for d in schema.dimensions:
        if d.is_record:
            raise InvalidSchema(f"writer does not emit record dimensions ({d.name})")
    blobs = [_variable_data(v, schema, axes, fill).tobytes() for v in schema.variables]
    vsizes = [_pad4(len(b)) for b in blobs]
    header_len = len(_encode_header(schema, [0] * len(blobs), vsizes, version))
    offsets = []
    pos = header_len
    for size in vsizes:
        offsets.append(pos)
        pos += size
    if version == 1 and pos >= 2**31:
        raise InvalidSchema("data exceeds CDF-1 offset range; use version=2")
    header = _encode_header(schema, offsets, vsizes, version)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for blob, size in zip(blobs, vsizes):
                fh.write(blob)
                fh.write(b"\0" * (size - len(blob)))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
