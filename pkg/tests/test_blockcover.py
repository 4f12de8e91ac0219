import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlight.blockcover import (
    Block,
    CoverStats,
    bounding_domain,
    cover_naive,
    cover_optimized,
    generate_workload,
    naive_subblock_count,
    pairwise_disjoint,
    rasterize,
    rasterize_mask,
    split_for_memory,
)
from gridlight.errors import CoverTooLarge, DimensionMismatch, InvalidParams, OutOfDomain, SplitImpossible

DIMS = ("time", "lat", "lon")


def q2_blocks():
    # the four clause blocks of the non-convex example, zero-based
    return [
        Block(DIMS, (0, 361, 360), (0, 720, 1439)),
        Block(DIMS, (0, 0, 360), (0, 359, 1439)),
        Block(DIMS, (0, 0, 360), (0, 720, 651)),
        Block(DIMS, (0, 0, 656), (0, 720, 1439)),
    ]


def test_q2_naive_trace():
    out, stats = cover_naive(q2_blocks())
    assert stats == CoverStats(input_blocks=4, sub_blocks=12, duplicates_removed=4, merges=4, output_blocks=4)
    assert pairwise_disjoint(out)
    domain = (1, 721, 1440)
    assert np.array_equal(rasterize_mask(out, domain), rasterize_mask(q2_blocks(), domain))


def test_q2_optimized_matches_naive():
    naive, _ = cover_naive(q2_blocks())
    opt, stats = cover_optimized(q2_blocks())
    assert pairwise_disjoint(opt)
    assert len(opt) <= len(naive)
    assert stats.output_blocks <= stats.sub_blocks
    domain = (1, 721, 1440)
    assert np.array_equal(rasterize_mask(opt, domain), rasterize_mask(naive, domain))
    # the excluded cells around lat 0, lon 163..163.75 stay uncovered
    mask = rasterize_mask(opt, domain)
    assert not mask[0, 360, 652:656].any()
    assert mask.sum() == 721 * 1080 - 4


def test_small_examples():
    one = Block.of(("x",), [0], [5])
    assert cover_naive([one])[0] == [one]
    assert cover_naive([one, one])[0] == [one]
    out, _ = cover_naive([one, Block.of(("x",), [3], [9])])
    assert out == [Block.of(("x",), [0], [9])]
    assert rasterize([Block.of(("x",), [0], [2])], (3,)) == {(0,), (1,), (2,)}
    two = [Block.of(("a", "b"), [0, 0], [1, 1]), Block.of(("a", "b"), [1, 1], [2, 2])]
    assert len(rasterize(two, (3, 3))) == 7
    assert rasterize([], (3,)) == frozenset()


def test_errors():
    with pytest.raises(DimensionMismatch):
        cover_naive([Block.of(("x",), [0], [1]), Block.of(("y",), [0], [1])])
    with pytest.raises(OutOfDomain):
        rasterize([Block.of(("x",), [0], [3])], (3,))
    with pytest.raises(InvalidParams):
        Block.of(("x",), [2], [1])


def test_split_for_memory_example():
    block = Block(DIMS, (0, 0, 0), (0, 720, 1439))
    parts = split_for_memory(block, 300_000, "lon")
    assert [p.shape[1] for p in parts] == [208, 208, 208, 97]
    assert all(p.shape[2] == 1440 for p in parts)
    assert split_for_memory(block, 10**7, "lon") == [block]
    with pytest.raises(SplitImpossible):
        split_for_memory(block, 1000, "lon")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(1, 60), st.data())
def test_split_for_memory_properties(shape, max_cells, data):
    d = len(shape)
    dims = tuple(f"d{k}" for k in range(d))
    fastest = data.draw(st.sampled_from(dims))
    block = Block.of(dims, [0] * d, [n - 1 for n in shape])
    f = dims.index(fastest)
    if shape[f] > max_cells:
        with pytest.raises(SplitImpossible):
            split_for_memory(block, max_cells, fastest)
        return
    parts = split_for_memory(block, max_cells, fastest)
    assert all(p.cells <= max_cells for p in parts)
    assert all(p.shape[f] == shape[f] for p in parts)
    assert sum(p.cells for p in parts) == block.cells
    assert rasterize(parts, shape) == rasterize([block], shape)


@st.composite
def block_sets(draw, max_n=8, max_d=3, side=12):
    d = draw(st.integers(1, max_d))
    n = draw(st.integers(1, max_n))
    dims = tuple(f"d{k}" for k in range(d))
    out = []
    for _ in range(n):
        start, end = [], []
        for _ in range(d):
            a = draw(st.integers(0, side - 1))
            b = draw(st.integers(a, side - 1))
            start.append(a)
            end.append(b)
        out.append(Block.of(dims, start, end))
    return out


@settings(max_examples=300, deadline=None)
@given(block_sets())
def test_covers_are_disjoint_and_exact(blocks):
    domain = (12,) * blocks[0].ndim
    ref = rasterize_mask(blocks, domain)
    for cover in (cover_naive, cover_optimized):
        out, stats = cover(blocks)
        assert pairwise_disjoint(out)
        assert np.array_equal(rasterize_mask(out, domain), ref)
        assert 0 <= stats.output_blocks <= stats.sub_blocks
        assert stats.output_blocks == len(out)


@settings(max_examples=200, deadline=None)
@given(block_sets())
def test_naive_fastest_dim_merge_is_exhaustive(blocks):
    out, _ = cover_naive(blocks)
    last = blocks[0].ndim - 1
    for a, b in itertools.permutations(out, 2):
        same_rest = a.start[:last] == b.start[:last] and a.end[:last] == b.end[:last]
        assert not (same_rest and a.end[last] + 1 == b.start[last])


def test_naive_cap():
    blocks = generate_workload("diagonal", 64, 3)
    with pytest.raises(CoverTooLarge):
        cover_naive(blocks, cap=naive_subblock_count(blocks) - 1)


@pytest.mark.parametrize("kind", ["aligned", "misaligned", "diagonal", "centered"])
def test_workloads_deterministic(kind):
    assert generate_workload(kind, 8, 2, seed=3) == generate_workload(kind, 8, 2, seed=3)
    assert len(generate_workload(kind, 8, 2, seed=3)) == 8


def test_workload_examples():
    assert len(generate_workload("aligned", 1, 2, seed=9)) == 1
    big, *inner = generate_workload("diagonal", 4, 2, seed=7)
    assert len(inner) == 3 and all(big.contains(b) for b in inner)
    blocks = generate_workload("centered", 3, 2, seed=1)
    cells = [rasterize([b], bounding_domain(blocks)) for b in blocks]
    assert frozenset.intersection(*cells)
    with pytest.raises(InvalidParams):
        generate_workload("spiral", 3, 2)


def test_q2_cover_on_downscaled_grid():
    # 19 lat x 37 lon at 10 degrees: lat 90..-90, lon 0..360
    lat = np.linspace(90, -90, 19)
    lon = np.arange(37) * 10.0
    inside = lambda la, lo: lo >= 90 and not (la == 0 and 160 <= lo <= 170)
    cells = {(0, i, j) for i in range(19) for j in range(37) if inside(lat[i], lon[j])}
    eq, lo_hi = 9, (16, 17)
    candidates = [
        Block(DIMS, (0, eq + 1, 9), (0, 18, 36)),
        Block(DIMS, (0, 0, 9), (0, eq - 1, 36)),
        Block(DIMS, (0, 0, 9), (0, 18, lo_hi[0] - 1)),
        Block(DIMS, (0, 0, lo_hi[1] + 1), (0, 18, 36)),
    ]
    assert rasterize(candidates, (1, 19, 37)) == cells
    out, _ = cover_optimized(candidates)
    assert len(out) <= 4 and pairwise_disjoint(out)
    assert rasterize(out, (1, 19, 37)) == cells
