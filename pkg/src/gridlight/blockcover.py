"""Disjoint covers of overlapping positional blocks.

A :class:`Block` is an axis-aligned box with inclusive bounds per dimension.
Predicates in disjunctive normal form produce one block per clause, and those
blocks may overlap; reading each of them would return duplicated rows.  The
functions here turn such a list into pairwise disjoint blocks covering the
same cells.

Internally every range is handled as a half-open edge pair ``[start, end+1)``
so that adjacency is plain equality of edges.

The last dimension of a block is the fastest-varying (contiguously stored)
one.  Both strategies try to keep blocks long along it.
"""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import CoverTooLarge, DimensionMismatch, InvalidParams, OutOfDomain, SplitImpossible

DEFAULT_NAIVE_CAP = 10**7


@dataclass(frozen=True)
class Block:
    dims: tuple[str, ...]
    start: tuple[int, ...]
    end: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.dims) == len(self.start) == len(self.end)):
            raise DimensionMismatch(f"block rank mismatch: {self.dims} {self.start} {self.end}")
        for s, e in zip(self.start, self.end):
            if s > e:
                raise InvalidParams(f"empty range [{s},{e}] in block")

    @classmethod
    def of(cls, dims, start, end) -> "Block":
        return cls(tuple(dims), tuple(int(s) for s in start), tuple(int(e) for e in end))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e - s + 1 for s, e in zip(self.start, self.end))

    @property
    def cells(self) -> int:
        return math.prod(self.shape)

    def overlaps(self, other: "Block") -> bool:
        return all(s1 <= e2 and s2 <= e1 for s1, e1, s2, e2 in zip(self.start, self.end, other.start, other.end))

    def contains(self, other: "Block") -> bool:
        return all(s1 <= s2 and e2 <= e1 for s1, e1, s2, e2 in zip(self.start, self.end, other.start, other.end))

    def __str__(self):
        return " ".join(f"{d}[{s},{e}]" for d, s, e in zip(self.dims, self.start, self.end))


@dataclass
class CoverStats:
    input_blocks: int = 0
    sub_blocks: int = 0
    duplicates_removed: int = 0
    merges: int = 0
    output_blocks: int = 0


def _check_dims(blocks) -> tuple[str, ...]:
    dims = blocks[0].dims
    for b in blocks:
        if b.dims != dims:
            raise DimensionMismatch(f"blocks over different dimensions: {dims} vs {b.dims}")
    return dims


# ---------------------------------------------------------------- naive


def naive_subblock_count(blocks) -> int:
    """Exact number of sub-blocks the naive split would create."""
    if not blocks:
        return 0
    edges = _edges(blocks)
    total = 0
    for b in blocks:
        n = 1
        for k in range(b.ndim):
            lo = bisect.bisect_left(edges[k], b.start[k])
            hi = bisect.bisect_left(edges[k], b.end[k] + 1)
            n *= hi - lo
        total += n
    return total


def _edges(blocks):
    ndim = blocks[0].ndim
    return [sorted({b.start[k] for b in blocks} | {b.end[k] + 1 for b in blocks}) for k in range(ndim)]


def cover_naive(blocks, cap: int = DEFAULT_NAIVE_CAP) -> tuple[list[Block], CoverStats]:
    """Split every block at every distinct boundary, deduplicate, merge.

    Sub-blocks are identified by their interval indices along each dimension,
    so two sub-blocks from different inputs are either identical or disjoint
    and a set removes the copies.  Merging then runs greedily over the
    dimensions, fastest-varying first, until no two blocks can be joined.
    """
    blocks = list(blocks)
    stats = CoverStats(input_blocks=len(blocks))
    if not blocks:
        return [], stats
    dims = _check_dims(blocks)
    ndim = len(dims)
    projected = naive_subblock_count(blocks)
    if projected > cap:
        raise CoverTooLarge(f"naive cover would create {projected} sub-blocks (cap {cap})")

    edges = _edges(blocks)
    seen: set[tuple[int, ...]] = set()
    for b in blocks:
        ranges = []
        for k in range(ndim):
            lo = bisect.bisect_left(edges[k], b.start[k])
            hi = bisect.bisect_left(edges[k], b.end[k] + 1)
            ranges.append(range(lo, hi))
        for cell in itertools.product(*ranges):
            stats.sub_blocks += 1
            seen.add(cell)
    stats.duplicates_removed = stats.sub_blocks - len(seen)

    # boxes in interval-index space: (lo_0, hi_0, lo_1, hi_1, ...), hi inclusive
    boxes = [tuple(v for i in cell for v in (i, i)) for cell in sorted(seen)]
    boxes, stats.merges = _merge_until_stable(boxes, ndim)

    out = [
        Block(dims,
              tuple(edges[k][box[2 * k]] for k in range(ndim)),
              tuple(edges[k][box[2 * k + 1] + 1] - 1 for k in range(ndim)))
        for box in boxes
    ]
    out.sort(key=lambda b: b.start)
    stats.output_blocks = len(out)
    return out, stats


def _merge_along(boxes, k):
    """Join boxes that agree everywhere except for touching ranges along dim k."""
    groups: dict[tuple, list] = {}
    for box in boxes:
        key = box[:2 * k] + box[2 * k + 2:]
        groups.setdefault(key, []).append(box)
    out = []
    merges = 0
    for group in groups.values():
        group.sort(key=lambda b: b[2 * k])
        cur = group[0]
        for nxt in group[1:]:
            if nxt[2 * k] == cur[2 * k + 1] + 1:
                cur = cur[:2 * k + 1] + (nxt[2 * k + 1],) + cur[2 * k + 2:]
                merges += 1
            else:
                out.append(cur)
                cur = nxt
        out.append(cur)
    return out, merges


def _merge_until_stable(boxes, ndim):
    total = 0
    while True:
        changed = 0
        for k in reversed(range(ndim)):
            boxes, m = _merge_along(boxes, k)
            changed += m
        total += changed
        if not changed:
            return boxes, total


# ---------------------------------------------------------------- optimized


def cover_optimized(blocks) -> tuple[list[Block], CoverStats]:
    """Recursive interval sweep producing a disjoint cover.

    Dimension 0 is swept outermost; for every slab between adjacent distinct
    boundaries the active blocks are cut to the slab and covered recursively
    over the remaining dimensions.  The innermost step is a 1-D union of
    intervals along the fastest-varying dimension.  Each slab's sub-cover is
    merged with the blocks of the preceding slab when their cross sections
    match, so the working set stays small.
    """
    blocks = list(blocks)
    stats = CoverStats(input_blocks=len(blocks))
    if not blocks:
        return [], stats
    dims = _check_dims(blocks)
    ndim = len(dims)
    # half-open boxes as flat tuples (lo_0, hi_0, lo_1, hi_1, ...)
    boxes = [tuple(v for s, e in zip(b.start, b.end) for v in (s, e + 1)) for b in blocks]
    cover = _find_cover(boxes, 0, ndim - 1, stats)
    out = [Block(dims, tuple(box[0::2]), tuple(e - 1 for e in box[1::2])) for box in cover]
    out.sort(key=lambda b: b.start)
    stats.output_blocks = len(out)
    return out, stats


def _find_cover(boxes, dim, last, stats):
    if dim == last:
        return _interval_cover(boxes, dim, stats)
    lo_i, hi_i = 2 * dim, 2 * dim + 1
    boundaries = sorted({b[lo_i] for b in boxes} | {b[hi_i] for b in boxes})
    by_start = sorted(boxes, key=lambda b: b[lo_i])
    nxt = 0
    active: list = []
    cover: list = []
    # boxes of the previous slab that end at its upper edge, keyed by cross section
    open_ends: dict[tuple, int] = {}
    for start, end in zip(boundaries, boundaries[1:]):
        while nxt < len(by_start) and by_start[nxt][lo_i] <= start:
            active.append(by_start[nxt])
            nxt += 1
        active = [b for b in active if b[hi_i] > start]
        if not active:
            open_ends = {}
            continue
        sliced = [b[:lo_i] + (start, end) + b[hi_i + 1:] for b in active]
        sub = _find_cover(sliced, dim + 1, last, stats)
        open_ends = _merge_aligned(sub, cover, open_ends, lo_i, start, stats)
    return cover


def _merge_aligned(sub, cover, open_ends, lo_i, start, stats):
    """Append ``sub`` to ``cover``, extending blocks of the previous slab."""
    hi_i = lo_i + 1
    new_open = {}
    for box in sub:
        key = box[:lo_i] + box[hi_i + 1:]
        idx = open_ends.get(key)
        if idx is not None and cover[idx][hi_i] == start:
            prev = cover[idx]
            cover[idx] = prev[:hi_i] + (box[hi_i],) + prev[hi_i + 1:]
            stats.merges += 1
            new_open[key] = idx
        else:
            cover.append(box)
            new_open[key] = len(cover) - 1
    return new_open


def _interval_cover(boxes, dim, stats):
    """Union of the boxes' ranges along ``dim``; all other ranges are equal."""
    lo_i, hi_i = 2 * dim, 2 * dim + 1
    stats.sub_blocks += len(boxes)
    ordered = sorted(boxes, key=lambda b: b[lo_i])
    out = []
    cur = ordered[0]
    for b in ordered[1:]:
        if b[lo_i] <= cur[hi_i]:
            if b[hi_i] > cur[hi_i]:
                cur = cur[:hi_i] + (b[hi_i],) + cur[hi_i + 1:]
            stats.merges += 1
        else:
            out.append(cur)
            cur = b
    out.append(cur)
    return out


def disjoint_cover(blocks, strategy: str = "optimized") -> list[Block]:
    if strategy == "naive":
        return cover_naive(blocks)[0]
    if strategy == "optimized":
        return cover_optimized(blocks)[0]
    raise InvalidParams(f"unknown cover strategy {strategy!r}")


# ---------------------------------------------------------------- oracles


def rasterize_mask(blocks, domain) -> np.ndarray:
    """Boolean occupancy grid of the union of ``blocks``."""
    domain = tuple(int(n) for n in domain)
    mask = np.zeros(domain, dtype=bool)
    for b in blocks:
        if b.ndim != len(domain):
            raise DimensionMismatch(f"block rank {b.ndim} vs domain rank {len(domain)}")
        if any(s < 0 or e >= n for s, e, n in zip(b.start, b.end, domain)):
            raise OutOfDomain(f"block {b} outside domain {domain}")
        mask[tuple(slice(s, e + 1) for s, e in zip(b.start, b.end))] = True
    return mask


def rasterize(blocks, domain) -> frozenset:
    """Exact set of cells covered by the union of ``blocks`` (test oracle)."""
    domain = tuple(int(n) for n in domain)
    cells = set()
    for b in blocks:
        if b.ndim != len(domain):
            raise DimensionMismatch(f"block rank {b.ndim} vs domain rank {len(domain)}")
        if any(s < 0 or e >= n for s, e, n in zip(b.start, b.end, domain)):
            raise OutOfDomain(f"block {b} outside domain {domain}")
        cells.update(itertools.product(*(range(s, e + 1) for s, e in zip(b.start, b.end))))
    return frozenset(cells)


def pairwise_disjoint(blocks) -> bool:
    blocks = list(blocks)
    return not any(a.overlaps(b) for a, b in itertools.combinations(blocks, 2))


def bounding_domain(blocks) -> tuple[int, ...]:
    return tuple(max(b.end[k] for b in blocks) + 1 for k in range(blocks[0].ndim))


# ---------------------------------------------------------------- memory splitting


def split_for_memory(block: Block, max_cells: int, fastest_dim: str | None = None) -> list[Block]:
    """Cut ``block`` into disjoint pieces of at most ``max_cells`` cells.

    Pieces keep the full extent of ``fastest_dim`` (default: the last
    dimension) and are cut from the slowest-varying dimension inward.
    """
    if max_cells <= 0:
        raise InvalidParams("max_cells must be positive")
    if fastest_dim is None:
        fastest_dim = block.dims[-1]
    if fastest_dim not in block.dims:
        raise InvalidParams(f"{fastest_dim!r} is not a dimension of the block")
    if block.cells <= max_cells:
        return [block]
    f = block.dims.index(fastest_dim)
    if block.shape[f] > max_cells:
        raise SplitImpossible(
            f"{fastest_dim} extent {block.shape[f]} exceeds max_cells {max_cells}")

    order = [k for k in range(block.ndim) if k != f] + [f]
    shape = block.shape
    # first dimension (slowest first) whose single slice fits in max_cells
    for pos, k in enumerate(order):
        inner = math.prod(shape[j] for j in order[pos + 1:])
        if inner <= max_cells:
            break
    step = max_cells // inner
    outer = order[:pos]

    pieces = []
    for idx in itertools.product(*(range(block.start[j], block.end[j] + 1) for j in outer)):
        for lo in range(block.start[k], block.end[k] + 1, step):
            start = list(block.start)
            end = list(block.end)
            for j, i in zip(outer, idx):
                start[j] = end[j] = i
            start[k] = lo
            end[k] = min(lo + step - 1, block.end[k])
            pieces.append(Block(block.dims, tuple(start), tuple(end)))
    return pieces


# ---------------------------------------------------------------- workloads


WORKLOADS = ("aligned", "misaligned", "diagonal", "centered")


def generate_workload(kind: str, n: int, d: int, seed: int = 0, extent: int = 16) -> list[Block]:
    """Deterministic benchmark block sets.

    aligned     n blocks of equal cross section placed side by side along
                dim 0; each neighbour pair overlaps by half with p=0.5.
    misaligned  aligned, with each block shifted by half its extent along
                each dimension except 0 with p=0.5.
    diagonal    one large block plus n-1 overlapping blocks on its diagonal,
                every edge distinct.
    centered    n blocks around a common center; block i is wider along
                dim 0 and narrower elsewhere than block i-1.
    """
    if kind not in WORKLOADS:
        raise InvalidParams(f"unknown workload {kind!r}")
    if n < 1 or d < 1 or extent < 2:
        raise InvalidParams(f"need n >= 1, d >= 1, extent >= 2 (got n={n}, d={d}, extent={extent})")
    rng = random.Random(seed)
    dims = tuple(f"d{k}" for k in range(d))
    half = extent // 2

    if kind in ("aligned", "misaligned"):
        out = []
        pos = 0
        for i in range(n):
            if i > 0:
                pos += extent - (half if rng.random() < 0.5 else 0)
            start = [pos] + [0] * (d - 1)
            if kind == "misaligned":
                for k in range(1, d):
                    if rng.random() < 0.5:
                        start[k] += half
            out.append(Block.of(dims, start, [s + extent - 1 for s in start]))
        return out

    if kind == "diagonal":
        # inner starts are odd, inner ends+1 even, so no two edges coincide
        size = 2 * n + 1
        out = [Block.of(dims, [0] * d, [size - 1] * d)]
        for i in range(n - 1):
            s = 1 + 2 * i
            out.append(Block.of(dims, [s] * d, [s + 2] * d))
        return out

    center = 2 * n
    h0, h_other = 0, 2 * n
    out = []
    for i in range(n):
        if i > 0:
            h0 += rng.randint(1, 2)
            h_other -= rng.randint(1, 2)
        halves = [h0] + [h_other] * (d - 1)
        out.append(Block.of(dims, [center - h for h in halves], [center + h for h in halves]))
    return out
