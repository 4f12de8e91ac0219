from __future__ import annotations

import numpy as np


class RowBatch:
    """Columnar rows keyed by ``(side, column name)``; all columns equal length."""

    __slots__ = ("columns", "length")

    def __init__(self, columns: dict, length: int | None = None):
        self.columns = columns
        if length is None:
            length = len(next(iter(columns.values()))) if columns else 0
        self.length = int(length)

    def __len__(self):
        return self.length

    def __getitem__(self, key):
        return self.columns[key]

    def __contains__(self, key):
        return key in self.columns

    def filter(self, mask: np.ndarray) -> "RowBatch":
        return RowBatch({k: v[mask] for k, v in self.columns.items()}, int(np.count_nonzero(mask)))

    def take(self, idx: np.ndarray) -> "RowBatch":
        return RowBatch({k: v[idx] for k, v in self.columns.items()}, len(idx))

    def merged(self, other: "RowBatch") -> "RowBatch":
        cols = dict(self.columns)
        cols.update(other.columns)
        return RowBatch(cols, self.length)

    @staticmethod
    def concat(batches, keys=None) -> "RowBatch":
        batches = [b for b in batches if b.length]
        if not batches:
            return RowBatch({k: np.empty(0) for k in (keys or ())}, 0)
        keys = list(batches[0].columns)
        return RowBatch({k: np.concatenate([b.columns[k] for b in batches]) for k in keys})
