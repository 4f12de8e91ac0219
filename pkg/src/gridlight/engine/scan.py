"""Per-file scans producing RowBatches."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..blockcover import split_for_memory
from ..catalog import read_tabular
from ..gridfile import IoCounter, open_grid_file, read_subarray
from ..rewrite import LocalPlan, dimension_axis, rewrite_local
from .batch import RowBatch
from .expressions import evaluate_atoms, evaluate_predicate


@dataclass
class FileStats:
    dataset: str
    file: str
    bytes_read: int = 0
    skipped: bool = False
    blocks: int = 0
    rows: int = 0


def local_plan(spec, handle, strategy: str = "optimized") -> LocalPlan:
    spec.descriptor.validate_file(handle)
    return rewrite_local(spec.global_query, handle, strategy)


def execute_scan(spec, file: str, max_cells: int = 2**22, strategy: str = "optimized",
                 stats: FileStats | None = None, reader=read_tabular):
    """Yield the RowBatches of one file that satisfy the scan's predicate."""
    if stats is None:
        stats = FileStats(spec.descriptor.name, file)
    if spec.descriptor.kind == "tabular":
        yield from _scan_tabular(spec, file, stats, reader)
    else:
        yield from _scan_grid(spec, file, max_cells, strategy, stats)


def _scan_tabular(spec, file, stats, reader):
    if not spec.dnf.clauses:
        stats.skipped = True
        return
    data = reader(spec.descriptor, file)
    side = spec.side
    batch = RowBatch({(side, k): v for k, v in data.items()}, len(next(iter(data.values()))))
    if spec.predicate is not None:
        batch = batch.filter(evaluate_predicate(spec.predicate, batch))
    stats.blocks = 1
    stats.rows += len(batch)
    if len(batch):
        yield batch


def _positions(block, k):
    n = block.shape[k]
    shape = [1] * block.ndim
    shape[k] = n
    pos = np.arange(block.start[k], block.end[k] + 1, dtype=np.int64).reshape(shape)
    return np.broadcast_to(pos, block.shape).reshape(-1)


def _scan_grid(spec, file, max_cells, strategy, stats):
    desc = spec.descriptor
    side = spec.side
    handle = open_grid_file(file)
    plan = local_plan(spec, handle, strategy)
    if plan.skipped:
        stats.skipped = True
        return
    schema = desc.row_schema
    dims = spec.global_query.dims
    wanted = set(spec.columns)
    axes = {}
    for name in wanted:
        col = schema.get(name)
        if col.role in ("spanning", "dim") and col.dim not in axes:
            axes[col.dim] = dimension_axis(desc, handle, col.dim).values
    label = np.array([os.path.basename(file)], dtype=object)
    counter = IoCounter()
    try:
        for block in plan.blocks:
            for piece in split_for_memory(block, max_cells, dims[-1]):
                n = piece.cells
                pos = {d: _positions(piece, k) for k, d in enumerate(dims)}
                cols = {}
                for name in spec.columns:
                    col = schema.get(name)
                    if col.role == "file":
                        cols[(side, name)] = np.broadcast_to(label, (n,))
                    elif col.role == "pos":
                        cols[(side, name)] = pos[col.dim]
                    else:
                        cols[(side, name)] = axes[col.dim][pos[col.dim]]
                for var in spec.variables:
                    data = read_subarray(handle, var, piece, counter)
                    cols[(side, var)] = data.astype(np.float64, copy=False).reshape(-1)
                stats.blocks += 1
                batch = RowBatch(cols, n)
                if plan.needs_filter:
                    batch = batch.filter(_residual_mask(plan, batch, pos, dims))
                stats.rows += len(batch)
                if len(batch):
                    yield batch
    finally:
        stats.bytes_read += counter.bytes_read


def _residual_mask(plan: LocalPlan, batch, pos, dims):
    """A row survives if some clause's block holds it and its residual atoms pass."""
    keep = np.zeros(len(batch), dtype=bool)
    for block, residual in plan.clause_blocks:
        inside = np.ones(len(batch), dtype=bool)
        for k, d in enumerate(dims):
            p = pos[d]
            inside &= (p >= block.start[k]) & (p <= block.end[k])
        if not inside.any():
            continue
        if residual:
            inside &= evaluate_atoms(residual, batch)
        keep |= inside
    return keep
