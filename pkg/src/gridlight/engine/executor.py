"""Query execution over a bounded pool of per-file tasks."""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..catalog import Catalog, EnvelopeSet, read_tabular
from ..queryir import bind, parse_query
from ..rewrite import DEFAULT_CLAUSE_CAP
from .aggregates import merge_states, new_state, update_states
from .batch import RowBatch
from .envelopes import compute_envelopes
from .expressions import evaluate_expression, evaluate_predicate
from .planner import PhysicalPlan, plan as build_plan
from .scan import FileStats, execute_scan

DEFAULT_MAX_CELLS = 2**22


@dataclass
class QueryStats:
    files: list = field(default_factory=list)  # FileStats in plan order
    rows_emitted: int = 0
    wall_ms: float = 0.0

    @property
    def bytes_read(self) -> int:
        return sum(f.bytes_read for f in self.files)

    @property
    def files_scanned(self) -> int:
        return sum(1 for f in self.files if not f.skipped)

    @property
    def files_skipped(self) -> int:
        return sum(1 for f in self.files if f.skipped)

    @property
    def blocks_loaded(self) -> int:
        return sum(f.blocks for f in self.files)

    def for_dataset(self, name: str) -> "QueryStats":
        return QueryStats([f for f in self.files if f.dataset == name])

    def per_file_bytes(self) -> dict:
        return {f.file: f.bytes_read for f in self.files}

    def trailer(self) -> str:
        lines = [
            f"bytes_read={self.bytes_read}",
            f"files_scanned={self.files_scanned}",
            f"files_skipped={self.files_skipped}",
            f"blocks_loaded={self.blocks_loaded}",
            f"rows_emitted={self.rows_emitted}",
            f"wall_ms={self.wall_ms:.1f}",
        ]
        names = list(dict.fromkeys(f.dataset for f in self.files))
        if len(names) > 1:
            for name in names:
                sub = self.for_dataset(name)
                lines += [
                    f"{name}.bytes_read={sub.bytes_read}",
                    f"{name}.files_scanned={sub.files_scanned}",
                    f"{name}.files_skipped={sub.files_skipped}",
                    f"{name}.blocks_loaded={sub.blocks_loaded}",
                ]
        return "\n".join(lines)


@dataclass
class QueryResult:
    names: tuple
    types: tuple
    columns: list  # one array (or list for aggregates) per output column
    stats: QueryStats

    def __len__(self):
        return len(self.columns[0]) if self.columns else 0

    def rows(self):
        """Result rows as tuples of Python values."""
        cols = [c.tolist() if isinstance(c, np.ndarray) else list(c) for c in self.columns]
        return list(zip(*cols))


class TabularMemo:
    """Parsed tabular files, reused while the file on disk is unchanged.

    Lives as long as one Engine, so the envelope pass and the scan that
    follows it share one parse.  Arrays are handed out read-only.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()

    def read(self, desc, file: str) -> dict:
        try:
            st = os.stat(file)
        except OSError:
            return read_tabular(desc, file)  # let the reader report it
        key = (os.path.abspath(file), st.st_mtime_ns, st.st_size, desc.schema.columns, desc.delimiter)
        with self._lock:
            hit = self._entries.get(key)
        if hit is None:
            hit = read_tabular(desc, file)
            for arr in hit.values():
                arr.flags.writeable = False
            with self._lock:
                self._entries[key] = hit
        return dict(hit)


class Engine:
    def __init__(self, catalog: Catalog, workers: int | None = None, max_cells: int = DEFAULT_MAX_CELLS,
                 clause_cap: int = DEFAULT_CLAUSE_CAP, strategy: str = "optimized"):
        self.catalog = catalog
        self.workers = max(1, workers or os.cpu_count() or 1)
        self.max_cells = max_cells
        self.clause_cap = clause_cap
        self.strategy = strategy
        self._tabular = TabularMemo()

    # planning

    def bind(self, text: str):
        return bind(parse_query(text), self.catalog)

    def plan(self, query, require_envelopes: bool = False) -> PhysicalPlan:
        bound = self.bind(query) if isinstance(query, str) else query
        return build_plan(bound, self.clause_cap, self.strategy, require_envelopes)

    def explain(self, query) -> str:
        p = query if isinstance(query, PhysicalPlan) else self.plan(query)
        return p.explain_text

    def compute_envelopes(self, dataset: str, dims) -> EnvelopeSet:
        env = compute_envelopes(self.catalog.get(dataset), dims, self._tabular.read)
        self.catalog.attach_envelopes(dataset, env)
        return env

    # execution

    def query(self, text: str, require_envelopes: bool = False) -> QueryResult:
        return self.execute(self.plan(text, require_envelopes))

    def _map(self, fn, items):
        if self.workers == 1 or len(items) <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=min(self.workers, len(items))) as pool:
            return list(pool.map(fn, items))

    def _scan_file(self, spec, file, sink):
        stats = FileStats(spec.descriptor.name, file)
        out = sink(execute_scan(spec, file, self.max_cells, self.strategy, stats, self._tabular.read))
        return out, stats

    def execute(self, plan: PhysicalPlan) -> QueryResult:
        t0 = time.perf_counter()
        bound = plan.bound
        stats = QueryStats()
        if plan.join is None:
            probe_spec = plan.scans[0]
            transform = None
        else:
            build_spec, probe_spec = plan.scans
            parts = self._map(lambda f: self._scan_file(build_spec, f, list), build_spec.descriptor.files)
            batches = [b for out, _ in parts for b in out]
            stats.files += [s for _, s in parts]
            transform = _HashJoin(plan.join.keys, RowBatch.concat(batches))

        post = bound.post_filter
        items = [i.expr for i in bound.select_list]

        def sink(batches):
            states = [new_state(a) for a in plan.aggregates] if plan.aggregates else None
            outputs = []
            for batch in batches:
                if transform is not None:
                    batch = transform.probe(batch)
                if post is not None and len(batch):
                    batch = batch.filter(evaluate_predicate(post, batch))
                if not len(batch):
                    continue
                if states is not None:
                    update_states(states, plan.aggregates, batch)
                else:
                    outputs.append([_as_output(evaluate_expression(e, batch)) for e in items])
            return states if states is not None else outputs

        parts = self._map(lambda f: self._scan_file(probe_spec, f, sink), probe_spec.descriptor.files)
        stats.files += [s for _, s in parts]
        if plan.aggregates:
            acc = [new_state(a) for a in plan.aggregates]
            for states, _ in parts:
                merge_states(acc, states)
            columns = [[s.result()] for s in acc]
        else:
            chunks = [o for out, _ in parts for o in out]
            columns = [
                np.concatenate([c[k] for c in chunks]) if chunks else np.empty(0)
                for k in range(len(items))
            ]
        result = QueryResult(bound.output_names, bound.output_types, columns, stats)
        stats.rows_emitted = len(result)
        stats.wall_ms = (time.perf_counter() - t0) * 1000.0
        return result


def _as_output(values):
    # evaluation may hand back a read-only broadcast view (e.g. the file column)
    return np.array(values, copy=True)


class _HashJoin:
    """Build on the left batch, probe with right batches; exact key equality."""

    def __init__(self, keys, build: RowBatch):
        self.keys = keys
        self.build = build
        self.table: dict = {}
        if len(build):
            cols = [build[l.key].tolist() for l, _ in keys]
            for i, k in enumerate(zip(*cols)):
                self.table.setdefault(k, []).append(i)

    def probe(self, batch: RowBatch) -> RowBatch:
        left_idx, right_idx = [], []
        cols = [batch[r.key].tolist() for _, r in self.keys]
        get = self.table.get
        for j, k in enumerate(zip(*cols)):
            hit = get(k)
            if hit:
                left_idx.extend(hit)
                right_idx.extend([j] * len(hit))
        li = np.asarray(left_idx, dtype=np.int64)
        ri = np.asarray(right_idx, dtype=np.int64)
        if not len(li):
            return RowBatch({}, 0)
        return self.build.take(li).merged(batch.take(ri))
