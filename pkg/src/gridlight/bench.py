"""Cover benchmark: one row per (strategy, workload, n, d)."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blockcover import (
    DEFAULT_NAIVE_CAP,
    bounding_domain,
    cover_naive,
    cover_optimized,
    generate_workload,
    pairwise_disjoint,
    rasterize_mask,
)
from .errors import CoverTooLarge

COLUMNS = ("strategy", "workload", "n", "d", "seed", "wall_ms", "input_blocks", "sub_blocks",
           "duplicates_removed", "merges", "output_blocks", "status")
RASTER_LIMIT = 2_000_000  # largest domain (cells) checked by rasterization


@dataclass
class BenchRow:
    strategy: str
    workload: str
    n: int
    d: int
    seed: int
    wall_ms: float
    stats: object
    status: str  # ok | unchecked | MISMATCH | cap-exceeded

    def values(self):
        s = self.stats
        counts = (s.input_blocks, s.sub_blocks, s.duplicates_removed, s.merges, s.output_blocks) if s else ("",) * 5
        return (self.strategy, self.workload, self.n, self.d, self.seed, f"{self.wall_ms:.3f}", *counts, self.status)


def run_case(workload: str, n: int, d: int, strategy: str = "both", seed: int = 0,
             cap: int = DEFAULT_NAIVE_CAP) -> list[BenchRow]:
    blocks = generate_workload(workload, n, d, seed)
    domain = bounding_domain(blocks)
    checkable = int(np.prod(domain, dtype=np.float64)) <= RASTER_LIMIT
    reference = rasterize_mask(blocks, domain) if checkable else None
    strategies = ("naive", "optimized") if strategy == "both" else (strategy,)
    rows = []
    for name in strategies:
        t0 = time.perf_counter()
        try:
            if name == "naive":
                out, stats = cover_naive(blocks, cap)
            else:
                out, stats = cover_optimized(blocks)
        except CoverTooLarge:
            rows.append(BenchRow(name, workload, n, d, seed, (time.perf_counter() - t0) * 1e3, None, "cap-exceeded"))
            continue
        ms = (time.perf_counter() - t0) * 1e3
        if reference is None:
            status = "unchecked" if pairwise_disjoint(out) else "MISMATCH"
        else:
            # equal union plus equal cell totals means no cell is covered twice
            same = np.array_equal(rasterize_mask(out, domain), reference)
            disjoint = sum(b.cells for b in out) == int(reference.sum())
            status = "ok" if same and disjoint else "MISMATCH"
        rows.append(BenchRow(name, workload, n, d, seed, ms, stats, status))
    return rows
