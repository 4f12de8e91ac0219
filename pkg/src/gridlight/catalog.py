"""Dataset registration, schema inference and the exposed row model.

A grid dataset is an ordered list of classic files sharing one schema, read
from the first file.  Dimensions are either *spanning* (their values continue
from file to file, e.g. one hour per file) or not (every file holds the same
axis).  A tabular dataset is a set of delimited text files with a declared
column list; it is mostly used as the small side of a join.

Timestamps are carried as float POSIX seconds everywhere inside the engine.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import (
    ArityMismatch,
    EmptyFileList,
    GridlightError,
    ParseFailure,
    SchemaInferenceFailure,
    SchemaMismatch,
    UnknownDataset,
    UnknownSpanningDim,
    UnparsableUnits,
)
from .gridfile import NUMERIC_TYPES, GridFileHandle, open_grid_file

log = logging.getLogger(__name__)

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
TABULAR_TYPES = ("f64", "i64", "timestamp", "text")

_UNIT_SECONDS = {"second": 1, "minute": 60, "hour": 3600, "day": 86400}
_UNITS_RE = re.compile(r"^\s*(seconds?|minutes?|hours?|days?)\s+since\s+(.+?)\s*$", re.IGNORECASE)
_INSTANT_RE = re.compile(
    r"^(\d{4})-(\d{1,2})-(\d{1,2})"
    r"(?:[ T](\d{1,2}):(\d{2})(?::(\d{2})(?:\.(\d*))?)?)?"
    r"\s*(Z|UTC|[+-]\d{2}:?\d{2})?$",
    re.IGNORECASE,
)


# ---------------------------------------------------------------- time


@dataclass(frozen=True)
class TimeUnits:
    unit: str  # second | minute | hour | day
    epoch: datetime

    @property
    def seconds(self) -> int:
        return _UNIT_SECONDS[self.unit]

    @property
    def epoch_posix(self) -> float:
        return (self.epoch - EPOCH).total_seconds()

    def __str__(self):
        return f"{self.unit}s since {self.epoch.strftime('%Y-%m-%d %H:%M:%S')}"


def parse_instant(text: str) -> datetime:
    """Parse an ISO-8601-like instant; naive instants are taken as UTC."""
    m = _INSTANT_RE.match(text.strip())
    if not m:
        raise ValueError(f"not an ISO-8601 instant: {text!r}")
    y, mo, d, h, mi, s, frac, tz = m.groups()
    micro = int((frac or "0").ljust(6, "0")[:6])
    dt = datetime(int(y), int(mo), int(d), int(h or 0), int(mi or 0), int(s or 0), micro, tzinfo=timezone.utc)
    if tz and tz.upper() not in ("Z", "UTC"):
        sign = 1 if tz[0] == "+" else -1
        digits = tz[1:].replace(":", "")
        dt -= sign * timedelta(hours=int(digits[:2]), minutes=int(digits[2:]))
    return dt


def parse_time_units(text: str) -> TimeUnits:
    m = _UNITS_RE.match(text or "")
    if not m:
        raise UnparsableUnits(f"cannot parse time units {text!r}")
    unit = m.group(1).lower().rstrip("s")
    try:
        epoch = parse_instant(m.group(2))
    except ValueError as exc:
        raise UnparsableUnits(f"cannot parse time units {text!r}") from exc
    return TimeUnits(unit, epoch)


def decode_time(raw: float, units) -> datetime:
    if isinstance(units, str):
        units = parse_time_units(units)
    return units.epoch + timedelta(seconds=float(raw) * units.seconds)


def encode_time(ts: datetime, units) -> float:
    if isinstance(units, str):
        units = parse_time_units(units)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return (ts - units.epoch).total_seconds() / units.seconds


def raw_to_posix(raw, units: TimeUnits) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) * units.seconds + units.epoch_posix


def parse_timestamp(text: str) -> float:
    """'YYYY-MM-DD HH:MM:SS' (UTC) to POSIX seconds."""
    return (parse_instant(text) - EPOCH).total_seconds()


def format_timestamp(posix: float) -> str:
    ts = EPOCH + timedelta(seconds=float(posix))
    out = ts.strftime("%Y-%m-%d %H:%M:%S")
    if ts.microsecond:
        out += f".{ts.microsecond:06d}".rstrip("0")
    return out


# ---------------------------------------------------------------- schema types


@dataclass(frozen=True)
class Column:
    name: str
    type: str  # text | timestamp | f64 | i64
    role: str  # file | spanning | dim | pos | var | column
    dim: str | None = None


@dataclass(frozen=True)
class RowSchema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaInferenceFailure(f"column names collide: {names}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def get(self, name: str) -> Column | None:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    def __contains__(self, name):
        return self.get(name) is not None


@dataclass(frozen=True)
class DatasetSchema:
    dimensions: tuple[tuple[str, int], ...] = ()
    variables: tuple[tuple[str, str], ...] = ()
    time_units: dict = field(default_factory=dict, hash=False)  # dim -> TimeUnits
    coordinate_dims: frozenset = frozenset()
    columns: tuple[tuple[str, str], ...] = ()  # tabular only

    @property
    def dim_names(self) -> list[str]:
        return [d for d, _ in self.dimensions]

    @property
    def var_names(self) -> list[str]:
        return [v for v, _ in self.variables]

    def dim_length(self, dim: str) -> int:
        return dict(self.dimensions)[dim]


@dataclass(frozen=True)
class EnvelopeSet:
    dims: tuple[str, ...]
    per_file: dict = field(hash=False)  # file -> {dim: (min, max)}

    def covers(self, file: str, row: dict) -> bool:
        bounds = self.per_file.get(file)
        return bounds is not None and all(bounds[d][0] <= row[d] <= bounds[d][1] for d in self.dims)


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    kind: str  # grid | tabular
    files: tuple[str, ...]
    spanning_dims: tuple[str, ...]
    schema: DatasetSchema
    envelopes: EnvelopeSet | None = None
    delimiter: str = ","

    @property
    def row_schema(self) -> RowSchema:
        return _row_schema(self)

    @property
    def non_spanning_dims(self) -> list[str]:
        return [d for d in self.schema.dim_names if d not in self.spanning_dims]

    def validate_file(self, handle: GridFileHandle) -> None:
        """Check a file against the dataset schema (deferred from registration)."""
        header = handle.header
        dims = _data_dims(header)
        if dims != tuple(self.schema.dim_names):
            raise SchemaMismatch(handle.path, f"dimensions {dims} != {tuple(self.schema.dim_names)}")
        for dim, length in self.schema.dimensions:
            if dim not in self.spanning_dims and handle.dim_length(dim) != length:
                raise SchemaMismatch(handle.path, f"dimension {dim} has length {handle.dim_length(dim)}, expected {length}")
        for var, dtype in self.schema.variables:
            if not header.has_variable(var):
                raise SchemaMismatch(handle.path, f"missing variable {var}")
            v = header.variable(var)
            if v.dtype != dtype or v.dims != tuple(self.schema.dim_names):
                raise SchemaMismatch(handle.path, f"variable {var} differs from the dataset schema")


def _row_schema(desc: DatasetDescriptor) -> RowSchema:
    if desc.kind == "tabular":
        return RowSchema(tuple(Column(n, t, "column") for n, t in desc.schema.columns))
    cols = [Column("file", "text", "file")]
    for dim in desc.schema.dim_names:
        if dim in desc.spanning_dims:
            cols.append(Column(dim, _dim_type(desc, dim), "spanning", dim))
    for dim in desc.schema.dim_names:
        if dim not in desc.spanning_dims:
            cols.append(Column(dim, _dim_type(desc, dim), "dim", dim))
            cols.append(Column(f"{dim}Pos", "i64", "pos", dim))
    for var, _ in desc.schema.variables:
        cols.append(Column(var, "f64", "var"))
    return RowSchema(tuple(cols))


def _dim_type(desc, dim):
    return "timestamp" if dim in desc.schema.time_units else "f64"


def _data_dims(header) -> tuple[str, ...]:
    """Dimension list of the highest-rank numeric data variable."""
    best: tuple[str, ...] = ()
    for v in header.variables:
        if v.dtype in NUMERIC_TYPES and header.coordinate_variable(v.name) is None and len(v.dims) > len(best):
            best = v.dims
    return best


def infer_grid_schema(handle: GridFileHandle) -> DatasetSchema:
    header = handle.header
    dims = _data_dims(header)
    if not dims:
        raise SchemaInferenceFailure(f"{handle.path}: no multidimensional numeric variable found")
    variables = tuple(
        (v.name, v.dtype) for v in header.variables
        if v.dims == dims and v.dtype in NUMERIC_TYPES and header.coordinate_variable(v.name) is None
    )
    time_units = {}
    coords = set()
    for dim in dims:
        cv = header.coordinate_variable(dim)
        if cv is None or cv.dtype == "char":
            continue
        coords.add(dim)
        units = cv.attributes.get("units")
        if isinstance(units, str) and " since " in units.lower():
            try:
                time_units[dim] = parse_time_units(units)
            except UnparsableUnits:
                log.warning("%s: ignoring unparsable time units %r on %s", handle.path, units, dim)
    return DatasetSchema(
        dimensions=tuple((d, handle.dim_length(d)) for d in dims),
        variables=variables,
        time_units=time_units,
        coordinate_dims=frozenset(coords),
    )


# ---------------------------------------------------------------- tabular files


def read_tabular(desc: DatasetDescriptor, file: str) -> dict[str, np.ndarray]:
    """Parse one delimited file into typed column arrays."""
    names = [n for n, _ in desc.schema.columns]
    types = [t for _, t in desc.schema.columns]
    raw: list[list[str]] = [[] for _ in names]
    linenos: list[int] = []
    try:
        fh = open(file, newline="")
    except OSError as exc:
        raise ParseFailure(file, 0, str(exc)) from exc
    with fh:
        for lineno, fields in enumerate(csv.reader(fh, delimiter=desc.delimiter), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if lineno == 1 and fields == names:
                continue
            if len(fields) != len(names):
                raise ArityMismatch(file, lineno, f"expected {len(names)} fields, got {len(fields)}")
            for col, f in zip(raw, fields):
                col.append(f)
            linenos.append(lineno)
    out = {}
    for name, typ, col in zip(names, types, raw):
        try:
            out[name] = _convert_column(col, typ)
        except ValueError:
            # redo row by row to report the first offending line
            for text, lineno in zip(col, linenos):
                try:
                    _convert_column([text], typ)
                except ValueError as exc:
                    raise ParseFailure(file, lineno, f"column {name}: {exc}") from exc
            raise
    return out


def _convert_column(col: list[str], typ: str) -> np.ndarray:
    if typ == "text":
        return np.array(col, dtype=object)
    if typ == "i64":
        return np.array([int(x) for x in col], dtype=np.int64)
    if typ == "timestamp":
        # rows usually repeat a handful of instants; parse each distinct one once
        seen = {text: parse_timestamp(text) for text in set(col)}
        return np.array([seen[x] for x in col], dtype=np.float64)
    return np.array([float(x) for x in col], dtype=np.float64)


# ---------------------------------------------------------------- catalog


class Catalog:
    """Registry of datasets, optionally persisted as a JSON manifest."""

    def __init__(self, manifest: str | os.PathLike | None = None):
        self.manifest = os.fspath(manifest) if manifest is not None else None
        self._datasets: dict[str, DatasetDescriptor] = {}
        self._lock = threading.Lock()

    def __contains__(self, name):
        return name in self._datasets

    def __iter__(self):
        return iter(self._datasets.values())

    def get(self, name: str) -> DatasetDescriptor:
        try:
            return self._datasets[name]
        except KeyError:
            raise UnknownDataset(f"unknown dataset {name!r}") from None

    def _store(self, desc: DatasetDescriptor) -> DatasetDescriptor:
        with self._lock:
            if desc.name in self._datasets:
                log.warning("replacing existing dataset %r", desc.name)
            self._datasets[desc.name] = desc
        return desc

    def register_grid_dataset(self, name: str, files, spanning_dims=()) -> DatasetDescriptor:
        files = tuple(os.fspath(f) for f in files)
        if not files:
            raise EmptyFileList(f"dataset {name!r}: no files")
        try:
            handle = open_grid_file(files[0])
        except GridlightError as exc:
            raise SchemaInferenceFailure(f"dataset {name!r}: {exc}") from exc
        schema = infer_grid_schema(handle)
        spanning = tuple(spanning_dims)
        for dim in spanning:
            if dim not in schema.dim_names:
                raise UnknownSpanningDim(f"dataset {name!r} has no dimension {dim!r}")
        # keep dimension order for spanning dims
        spanning = tuple(d for d in schema.dim_names if d in spanning)
        desc = DatasetDescriptor(name, "grid", files, spanning, schema)
        desc.row_schema  # noqa: B018  column-name collisions surface here
        return self._store(desc)

    def register_tabular_dataset(self, name: str, files, columns, delimiter: str = ",") -> DatasetDescriptor:
        files = tuple(os.fspath(f) for f in files)
        if not files:
            raise EmptyFileList(f"dataset {name!r}: no files")
        columns = tuple((str(n), str(t)) for n, t in columns)
        for n, t in columns:
            if t not in TABULAR_TYPES:
                raise SchemaInferenceFailure(f"column {n}: unsupported type {t!r}")
        schema = DatasetSchema(columns=columns)
        desc = DatasetDescriptor(name, "tabular", files, (), schema, delimiter=delimiter)
        desc.row_schema  # noqa: B018
        return self._store(desc)

    def attach_envelopes(self, name: str, envelopes: EnvelopeSet | None) -> DatasetDescriptor:
        return self._store_quiet(replace(self.get(name), envelopes=envelopes))

    def _store_quiet(self, desc):
        with self._lock:
            self._datasets[desc.name] = desc
        return desc

    # persistence

    def to_manifest(self) -> dict:
        entries = []
        for d in self._datasets.values():
            entry = {"name": d.name, "kind": d.kind, "files": list(d.files)}
            if d.kind == "grid":
                entry["spanning_dims"] = list(d.spanning_dims)
            else:
                entry["columns"] = [f"{n}:{t}" for n, t in d.schema.columns]
                entry["delimiter"] = d.delimiter
            entries.append(entry)
        return {"datasets": entries}

    def save(self, path=None) -> None:
        path = os.fspath(path or self.manifest)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_manifest(), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "Catalog":
        cat = cls(path)
        if not os.path.exists(path):
            return cat
        with open(path) as fh:
            data = json.load(fh)
        for entry in data.get("datasets", []):
            if entry["kind"] == "grid":
                cat.register_grid_dataset(entry["name"], entry["files"], entry.get("spanning_dims", ()))
            else:
                cols = [c.split(":", 1) for c in entry["columns"]]
                cat.register_tabular_dataset(entry["name"], entry["files"], cols, entry.get("delimiter", ","))
        return cat


def parse_column_spec(spec: str) -> list[tuple[str, str]]:
    """'time:timestamp,lat:f64' -> [('time', 'timestamp'), ('lat', 'f64')]"""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, typ = part.partition(":")
        out.append((name.strip(), (typ or "f64").strip()))
    return out
