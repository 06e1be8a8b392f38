"""Sliding-window building blocks: the smooth histogram and the per-item window counter.

Both structures keep a short list of stream positions.  The smooth histogram
starts an estimator instance at every position and discards positions whose
neighbours already approximate each other.  The window counter does the same
for the occurrences of one item with an additive budget.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Any, Callable

from .hashing import derive_seed


@dataclass
class TimestampedInstance:
    start: int
    instance: Any


def _default_measure(inst) -> float:
    return inst.estimate()


class SmoothHistogram:
    """Generic smooth histogram over estimator instances.

    `factory(seed)` builds a fresh instance with `update(item)`; `measure(inst)`
    reads its current estimate.  An interior timestamp i is deleted when
    x[i+1] >= (1 - beta/2) * x[i-1], scanning oldest to newest until nothing
    changes.  The first and last timestamps are never deleted by that rule.
    With `max_window` set, timestamps wholly older than that window expire.
    """

    def __init__(self, beta: float, factory: Callable[[int], Any], seed: int = 0,
                 measure: Callable[[Any], float] = _default_measure,
                 max_window: int | None = None, batch: int = 1):
        if not (0.0 < beta < 1.0):
            raise ValueError(f"gap beta must lie in (0, 1), got {beta!r}")
        if batch < 1:
            raise ValueError("batch must be at least 1")
        self.beta = beta
        self.factory = factory
        self.seed = seed
        self.measure = measure
        self.max_window = max_window
        self.batch = batch
        self.time = 0
        self.entries: list[TimestampedInstance] = []

    @property
    def timestamps(self) -> list[int]:
        return [e.start for e in self.entries]

    @property
    def size(self) -> int:
        return len(self.entries)

    def estimates(self) -> list[float]:
        return [self.measure(e.instance) for e in self.entries]

    def _deletable(self, x_prev: float, x_next: float) -> bool:
        return x_next >= (1.0 - self.beta / 2.0) * x_prev

    def update(self, item) -> None:
        self.time += 1
        if (self.time - 1) % self.batch == 0:
            inst = self.factory(derive_seed(self.seed, self.time))
            self.entries.append(TimestampedInstance(self.time, inst))
        for e in self.entries:
            e.instance.update(item)
        self._expire()
        self.prune()

    def _expire(self) -> None:
        if self.max_window is None:
            return
        start = self.time - self.max_window + 1
        drop = 0
        while len(self.entries) - drop >= 2 and self.entries[drop + 1].start <= start:
            drop += 1
        if drop:
            del self.entries[:drop]

    def prune(self) -> None:
        x = self.estimates()
        changed = True
        while changed:
            changed = False
            i = 1
            while i < len(x) - 1:
                if self._deletable(x[i - 1], x[i + 1]):
                    del x[i]
                    del self.entries[i]
                    changed = True
                else:
                    i += 1

    def query(self, window: int):
        """(a, x_a, instance) for the latest timestamp at or before the window start.

        `a` is 1-based.
        """
        if not self.entries:
            raise ValueError("no data")
        if window < 1 or window > self.time:
            raise ValueError(f"window {window} outside [1, {self.time}]")
        if self.max_window is not None and window > self.max_window:
            raise ValueError(f"window {window} exceeds the configured maximum {self.max_window}")
        start = self.time - window + 1
        a = bisect.bisect_right(self.timestamps, start)
        entry = self.entries[a - 1]
        return a, self.measure(entry.instance), entry.instance


class LengthHistogram(SmoothHistogram):
    """Deterministic timestamps driven only by suffix lengths.

    Interior timestamp i survives while (t - t[i-1] + 1) > ratio * (t - t[i+1] + 1).
    """

    def __init__(self, factory, ratio: float = 1.01, seed: int = 0,
                 max_window: int | None = None):
        super().__init__(0.5, factory, seed, measure=lambda inst: 0.0,
                         max_window=max_window)
        self.ratio = ratio

    def prune(self) -> None:
        t = self.time
        changed = True
        while changed:
            changed = False
            i = 1
            while i < len(self.entries) - 1:
                older = t - self.entries[i - 1].start + 1
                newer = t - self.entries[i + 1].start + 1
                if older <= self.ratio * newer:
                    del self.entries[i]
                    changed = True
                else:
                    i += 1


class WindowCounter:
    """Sliding-window count of one item with additive error at most the budget.

    Nodes are (time, running count) pairs, one per surviving occurrence.  An
    interior node is dropped when its two neighbours' running counts differ by
    less than the current budget.  A query answers with the count since the
    oldest surviving node inside the window, so it never overcounts.

    In the default mode every update applies the deletion rule to every node.
    With `lazy=True` the rule is applied only when the tracked item arrives:
    the newest interior nodes are checked, and a full pass runs once the
    budget has grown by the factor `growth` since the previous full pass.
    A query always runs a full pass.
    """

    def __init__(self, item: int, budget: float | Callable[[int], float] = 0.0,
                 max_window: int | None = None, lazy: bool = False,
                 growth: float = 1.25, start_time: int = 0):
        self.item = item
        self._budget_fn = budget if callable(budget) else None
        self.budget = 0.0 if callable(budget) else float(budget)
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        self.max_window = max_window
        self.lazy = lazy
        self.growth = growth
        self.time = start_time
        self.total = 0
        self.times: list[int] = []
        self.cums: list[int] = []
        self.full_budget = self.budget
        self.max_budget = self.budget

    @property
    def size(self) -> int:
        return len(self.times)

    def _set_budget(self, budget):
        if budget is None and self._budget_fn is not None:
            budget = self._budget_fn(self.time)
        if budget is not None:
            if budget < 0:
                raise ValueError("budget must be non-negative")
            self.budget = float(budget)
            self.max_budget = max(self.max_budget, self.budget)

    def update(self, item: int, budget: float | None = None) -> None:
        self.time += 1
        self._set_budget(budget)
        hit = item == self.item
        if hit:
            self.total += 1
            self.times.append(self.time)
            self.cums.append(self.total)
        if not self.lazy:
            self._expire()
            self._full_pass()
        elif hit:
            self._expire()
            if self.budget >= self.growth * self.full_budget:
                self._full_pass()
            else:
                self._tail_pass()

    def _expire(self) -> None:
        if self.max_window is None:
            return
        cut = self.time - self.max_window + 1
        k = bisect.bisect_left(self.times, cut)
        if k:
            del self.times[:k]
            del self.cums[:k]

    def _full_pass(self) -> None:
        m = self.budget
        c = self.cums
        changed = True
        while changed:
            changed = False
            i = 1
            while i < len(c) - 1:
                if c[i + 1] - c[i - 1] < m:
                    del c[i]
                    del self.times[i]
                    changed = True
                else:
                    i += 1
        self.full_budget = m

    def _tail_pass(self) -> None:
        c = self.cums
        while len(c) >= 3 and c[-1] - c[-3] < self.budget:
            del c[-2]
            del self.times[-2]

    def query(self, window: int, budget: float | None = None) -> int:
        if window < 1:
            raise ValueError("window must be at least 1")
        self._set_budget(budget)
        self._expire()
        self._full_pass()
        start = self.time - window + 1
        k = bisect.bisect_left(self.times, start)
        if k == len(self.times):
            return 0
        return self.total - self.cums[k] + 1
