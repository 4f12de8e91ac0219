"""Mergeable partial aggregate states.

Each worker folds its batches into fresh states; the control thread merges
the partial states.  Merging is associative and commutative, so the result
does not depend on file order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..queryir.ast import Aggregate
from .expressions import evaluate_expression


class CountState:
    def __init__(self):
        self.n = 0

    def update(self, values, n):
        self.n += n

    def merge(self, other):
        self.n += other.n

    def result(self):
        return self.n


class MinState:
    def __init__(self):
        self.value = None

    def update(self, values, n):
        if n:
            v = float(np.min(values))
            self.value = v if self.value is None else min(self.value, v)

    def merge(self, other):
        if other.value is not None:
            self.value = other.value if self.value is None else min(self.value, other.value)

    def result(self):
        return self.value


class MaxState(MinState):
    def update(self, values, n):
        if n:
            v = float(np.max(values))
            self.value = v if self.value is None else max(self.value, v)

    def merge(self, other):
        if other.value is not None:
            self.value = other.value if self.value is None else max(self.value, other.value)


class MeanState:
    """Compensated running sum kept as an unevaluated pair ``hi + lo``.

    ``hi`` is the correctly rounded total and ``lo`` the correctly rounded
    remainder, both from math.fsum, so splitting the input into batches or
    merging partial states in any order does not change the result.
    """

    def __init__(self):
        self.hi = 0.0
        self.lo = 0.0
        self.n = 0

    def _absorb(self, terms):
        parts = [self.hi, self.lo, *terms]
        self.hi = math.fsum(parts)
        parts.append(-self.hi)
        self.lo = math.fsum(parts)

    def update(self, values, n):
        if n:
            self._absorb(np.asarray(values, dtype=np.float64).tolist())
            self.n += n

    def merge(self, other):
        self._absorb((other.hi, other.lo))
        self.n += other.n

    def result(self):
        if self.n == 0:
            return None
        return math.fsum((self.hi, self.lo)) / self.n


@dataclass(frozen=True)
class Histogram:
    lo: float
    hi: float
    counts: tuple
    underflow: int
    overflow: int

    @property
    def edges(self) -> np.ndarray:
        return histogram_edges(self.lo, self.hi, len(self.counts))

    def __str__(self):
        return f"underflow={self.underflow};counts={' '.join(map(str, self.counts))};overflow={self.overflow}"


def histogram_edges(lo, hi, bins) -> np.ndarray:
    """Bin edges lo + i*w; the last edge is pinned to ``hi``."""
    w = (hi - lo) / bins
    edges = lo + w * np.arange(bins + 1, dtype=np.float64)
    edges[-1] = hi
    return edges


class HistogramState:
    """Equal-width half-open bins [e_i, e_i+1) plus underflow (< lo) and
    overflow (>= hi) counters.  NaN values are not counted."""

    def __init__(self, lo, hi, bins):
        self.lo, self.hi, self.bins = lo, hi, bins
        self.inner = histogram_edges(lo, hi, bins)[1:-1]
        self.counts = np.zeros(bins, dtype=np.int64)
        self.underflow = 0
        self.overflow = 0

    def update(self, values, n):
        if not n:
            return
        values = values[~np.isnan(values)]
        under = values < self.lo
        over = values >= self.hi
        self.underflow += int(np.count_nonzero(under))
        self.overflow += int(np.count_nonzero(over))
        inside = values[~(under | over)]
        idx = np.searchsorted(self.inner, inside, side="right")
        self.counts += np.bincount(idx, minlength=self.bins)

    def merge(self, other):
        self.counts += other.counts
        self.underflow += other.underflow
        self.overflow += other.overflow

    def result(self):
        return Histogram(self.lo, self.hi, tuple(int(c) for c in self.counts), self.underflow, self.overflow)


def new_state(agg: Aggregate):
    if agg.func == "count":
        return CountState()
    if agg.func == "min":
        return MinState()
    if agg.func == "max":
        return MaxState()
    if agg.func == "mean":
        return MeanState()
    if agg.func == "histogram":
        return HistogramState(*agg.params)
    raise ValueError(f"unknown aggregate {agg.func}")


def update_states(states, aggs, batch) -> None:
    n = len(batch)
    for state, agg in zip(states, aggs):
        if agg.func == "count":
            state.update(None, n)
        else:
            state.update(evaluate_expression(agg.arg, batch), n)


def merge_states(acc, part) -> None:
    for a, b in zip(acc, part):
        a.merge(b)
