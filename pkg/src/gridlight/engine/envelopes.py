"""Per-file min/max envelopes and the join-pruning predicate built from them."""

from __future__ import annotations

import numpy as np

from ..catalog import DatasetDescriptor, EnvelopeSet, read_tabular
from ..errors import UnknownColumn
from ..gridfile import open_grid_file
from ..queryir.ast import Atom, and_all, or_all
from ..rewrite import dimension_axis


def compute_envelopes(desc: DatasetDescriptor, dims, reader=read_tabular) -> EnvelopeSet:
    """Tight [min, max] of each column in ``dims`` for every non-empty file.

    Grid datasets use axis endpoints only, so no variable bytes are read.
    """
    dims = tuple(dims)
    schema = desc.row_schema
    for d in dims:
        col = schema.get(d)
        if col is None:
            raise UnknownColumn(f"dataset {desc.name!r} has no column {d!r}")
        if desc.kind == "grid" and col.role not in ("spanning", "dim", "pos"):
            raise UnknownColumn(f"envelopes on grid datasets need dimension columns; {d!r} is a {col.role}")
        if col.type == "text":
            raise UnknownColumn(f"cannot envelope text column {d!r}")
    per_file = {}
    for f in desc.files:
        bounds = {}
        if desc.kind == "grid":
            handle = open_grid_file(f)
            desc.validate_file(handle)
            for d in dims:
                col = schema.get(d)
                n = handle.dim_length(col.dim)
                if n == 0:
                    break
                if col.role == "pos":
                    bounds[d] = (0.0, float(n - 1))
                else:
                    v = dimension_axis(desc, handle, col.dim).values
                    bounds[d] = (float(min(v[0], v[-1])), float(max(v[0], v[-1])))
            else:
                per_file[f] = bounds
        else:
            data = reader(desc, f)
            if not len(next(iter(data.values()))):
                continue
            for d in dims:
                v = data[d]
                bounds[d] = (float(np.min(v)), float(np.max(v)))
            per_file[f] = bounds
    return EnvelopeSet(dims, per_file)


def envelope_predicate(envelopes: EnvelopeSet, files, columns):
    """OR over files of AND over columns of (col >= min AND col <= max).

    ``columns`` maps envelope column names to the BoundColumn the bounds are
    applied to.  Returns None when the envelope set covers no file at all.
    """
    disj = []
    for f in files:
        bounds = envelopes.per_file.get(f)
        if bounds is None:
            continue
        conj = []
        for name, col in columns.items():
            lo, hi = bounds[name]
            conj.append(Atom(col, ">=", lo))
            conj.append(Atom(col, "<=", hi))
        disj.append(and_all(conj))
    return or_all(disj)
