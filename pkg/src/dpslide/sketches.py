"""Insertion-only streaming sketches: AMS, CountSketch and Misra-Gries."""

from __future__ import annotations

import math

import numpy as np

from .hashing import BucketFamily, SignFamily, derive_seed

# Above this many table cells the AMS sketch stops caching a dense sign table.
_SIGN_TABLE_LIMIT = 1 << 26


def _check_unit(name, value):
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")


def _check_item(item, n):
    if not (1 <= item <= n):
        raise ValueError(f"item {item} outside universe [1, {n}]")


def ams_dimensions(alpha: float, delta: float) -> tuple[int, int]:
    """(rows per repetition, repetitions) for a (1 +- alpha) F2 estimate with failure delta."""
    _check_unit("alpha", alpha)
    _check_unit("delta", delta)
    return math.ceil(6.0 / alpha**2), math.ceil(48.0 * math.log(1.0 / delta))


def _median_of_means(sums: np.ndarray) -> float:
    sq = sums.astype(np.float64) ** 2
    return float(np.median(sq.mean(axis=1)))


class AmsSketch:
    """AMS estimator of F2 = sum_i f_i^2.

    The sketch keeps `reps` independent groups of `rows` signed accumulators.
    Each group averages its squared accumulators and the estimate is the
    median over groups.
    """

    def __init__(self, alpha: float, delta: float, n: int, seed: int = 0,
                 rows: int | None = None, reps: int | None = None):
        if n < 1:
            raise ValueError("universe size n must be at least 1")
        r, d = ams_dimensions(alpha, delta)
        self.alpha = alpha
        self.delta = delta
        self.n = n
        self.seed = seed
        self.rows = rows or r
        self.reps = reps or d
        self.family = SignFamily(self.rows * self.reps, derive_seed(seed, 1))
        self.sums = np.zeros((self.reps, self.rows), dtype=np.int64)
        self.update_count = 0
        self._table = None

    @classmethod
    def for_l2(cls, alpha, delta, n, seed=0, **kw):
        """Sketch whose square-rooted estimate is a (1 +- alpha) approximation of L2."""
        _check_unit("alpha", alpha)
        return cls(alpha / 3.0, delta, n, seed, **kw)

    def fresh_like(self) -> "AmsSketch":
        """An empty sketch sharing this sketch's hash functions."""
        other = object.__new__(AmsSketch)
        other.__dict__.update(self.__dict__)
        other.sums = np.zeros_like(self.sums)
        other.update_count = 0
        return other

    def update(self, item: int) -> None:
        _check_item(item, self.n)
        self.sums += self.family.signs(item).reshape(self.reps, self.rows)
        self.update_count += 1

    def _sign_table(self):
        if self._table is None:
            self._table = self.family.table(self.n)
        return self._table

    def update_counts(self, items, counts) -> None:
        """Apply `counts[i]` copies of `items[i]` at once (the sketch is linear)."""
        items = np.asarray(items, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if items.size == 0:
            return
        if items.min() < 1 or items.max() > self.n:
            raise ValueError("item outside universe")
        if self.n * self.rows * self.reps <= _SIGN_TABLE_LIMIT:
            tab = self._sign_table()
            delta = counts @ tab[items - 1].astype(np.int64)
        else:
            delta = self.family.signed_totals(items, counts)
        self.sums += delta.reshape(self.reps, self.rows)
        self.update_count += int(counts.sum())

    def estimate_f2(self) -> float:
        if self.update_count == 0:
            return 0.0
        return _median_of_means(self.sums)

    def estimate_l2(self) -> float:
        return math.sqrt(self.estimate_f2())


class CountSketchTable:
    """CountSketch over the universe [n] used for L2 heavy hitters.

    `estimator="median"` returns median_j s_j(i) * S[j, h_j(i)].
    `estimator="mean_abs"` returns the mean over rows of |S[j, h_j(i)]|.
    """

    def __init__(self, alpha: float, delta: float, n: int, seed: int = 0,
                 rows: int | None = None, buckets: int | None = None,
                 estimator: str = "median"):
        _check_unit("alpha", alpha)
        _check_unit("delta", delta)
        if n < 1:
            raise ValueError("universe size n must be at least 1")
        if estimator not in ("median", "mean_abs"):
            raise ValueError(f"unknown estimator {estimator!r}")
        self.alpha = alpha
        self.delta = delta
        self.n = n
        self.seed = seed
        self.estimator = estimator
        self.rows = rows or math.ceil(8 * math.log2(n / delta))
        self.buckets = buckets or math.ceil(6.0 / alpha**2)
        self.signs = SignFamily(self.rows, derive_seed(seed, 2))
        self.hashes = BucketFamily(self.rows, self.buckets, derive_seed(seed, 3))
        self.counters = np.zeros((self.rows, self.buckets), dtype=np.int64)
        self.update_count = 0
        self._idx = np.arange(self.rows)

    def update(self, item: int) -> None:
        _check_item(item, self.n)
        self.counters[self._idx, self.hashes.buckets_of(item)] += self.signs.signs(item)
        self.update_count += 1

    def row_values(self, item: int) -> np.ndarray:
        """Per-row signed contributions s_j(i) * S[j, h_j(i)]."""
        _check_item(item, self.n)
        vals = self.counters[self._idx, self.hashes.buckets_of(item)]
        return vals * self.signs.signs(item)

    def estimate(self, item: int) -> float:
        if self.estimator == "mean_abs":
            _check_item(item, self.n)
            return float(np.abs(self.counters[self._idx, self.hashes.buckets_of(item)]).mean())
        return float(np.median(self.row_values(item)))

    def estimate_all(self) -> np.ndarray:
        """Estimates for items 1..n (index i holds item i+1)."""
        b = self.hashes.table(self.n)
        vals = self.counters[self._idx[None, :], b]
        if self.estimator == "mean_abs":
            return np.abs(vals).mean(axis=1)
        return np.median(vals * self.signs.table(self.n), axis=1)

    def heavy_hitters(self, l2_reference: float):
        if l2_reference < 0:
            raise ValueError("l2_reference must be non-negative")
        if self.update_count == 0:
            return []
        est = self.estimate_all()
        cut = 0.75 * self.alpha * l2_reference
        hits = [(int(i) + 1, float(est[i])) for i in np.flatnonzero(est >= cut)]
        return sort_report(hits)


def sort_report(entries):
    """Descending by value, ties broken by ascending item id."""
    return sorted(entries, key=lambda e: (-e[1], e[0]))


class MisraGriesSummary:
    """Deterministic frequent-items summary with k = ceil(1/alpha) counters.

    A tracked item increments its counter; an untracked item takes a free
    counter if one exists; otherwise every counter is decremented and the
    zeros are dropped.
    """

    def __init__(self, alpha: float, n: int | None = None):
        _check_unit("alpha", alpha)
        self.alpha = alpha
        self.n = n
        self.capacity = math.ceil(1.0 / alpha)
        self.counters: dict[int, int] = {}
        self.processed = 0

    def update(self, item: int) -> None:
        if self.n is not None:
            _check_item(item, self.n)
        self.processed += 1
        c = self.counters
        if item in c:
            c[item] += 1
        elif len(c) < self.capacity:
            c[item] = 1
        else:
            for key in list(c):
                if c[key] == 1:
                    del c[key]
                else:
                    c[key] -= 1

    def estimate(self, item: int) -> int:
        return self.counters.get(item, 0)

    def heavy_hitters(self, l1_reference: float):
        cut = 0.75 * self.alpha * l1_reference
        return sort_report([(k, v) for k, v in self.counters.items() if v >= cut])

    def snapshot(self) -> dict[int, int]:
        return dict(self.counters)
