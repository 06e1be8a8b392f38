"""Exact brute-force reference computations.

Everything here keeps the whole stream and recounts from scratch.  It exists
to be obviously correct, not fast.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np


def _check_position(stream, t):
    if not (1 <= t <= len(stream)):
        raise ValueError(f"position {t} outside [1, {len(stream)}]")


def exact_window_freqs(stream, t: int, window: int) -> dict[int, int]:
    """Counts over positions max(1, t-W+1) .. t (1-based, inclusive)."""
    _check_position(stream, t)
    if window < 1:
        raise ValueError("window must be at least 1")
    lo = max(0, t - window)
    return dict(Counter(int(x) for x in stream[lo:t]))


def exact_lp(freqs, p: int) -> float:
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    vals = freqs.values() if isinstance(freqs, dict) else freqs
    if p == 1:
        return float(sum(vals))
    return math.sqrt(sum(v * v for v in vals))


def exact_f2(freqs) -> int:
    vals = freqs.values() if isinstance(freqs, dict) else freqs
    return int(sum(v * v for v in vals))


def exact_heavy_hitters(freqs: dict[int, int], alpha: float, p: int):
    """(must_report, must_not_report) with the (alpha/2, alpha) gray zone in neither.

    Items absent from `freqs` have frequency zero and are implicitly in the
    must-not-report set.
    """
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    norm = exact_lp(freqs, p)
    must = {k for k, v in freqs.items() if v >= alpha * norm}
    must_not = {k for k, v in freqs.items() if v <= alpha / 2 * norm}
    return must, must_not


class ExactWindow:
    """Keeps the full stream and answers window-frequency queries exactly."""

    def __init__(self, stream=()):
        self.items: list[int] = [int(x) for x in stream]

    def update(self, item: int) -> None:
        self.items.append(int(item))

    @property
    def position(self) -> int:
        return len(self.items)

    def freqs(self, window: int, t: int | None = None) -> dict[int, int]:
        return exact_window_freqs(self.items, self.position if t is None else t, window)


def window_counts_array(stream, t: int, window: int, n: int) -> np.ndarray:
    """Dense counts (index k holds item k, index 0 unused); vectorized oracle."""
    _check_position(stream, t)
    lo = max(0, t - window)
    return np.bincount(np.asarray(stream[lo:t], dtype=np.int64), minlength=n + 1)


def neighbor_pairs(stream, count: int, rng, n: int | None = None):
    """`count` pairs (stream, stream') differing in exactly one position's item.

    The replacement item differs from the original, drawn from [1, n] (n
    defaults to the largest id in the stream, and at least 2).
    """
    stream = list(int(x) for x in stream)
    if not stream:
        raise ValueError("stream must be non-empty")
    n = n or max(max(stream), 2)
    pairs = []
    for _ in range(count):
        i = int(rng.integers(len(stream)))
        new = int(rng.integers(1, n))
        if new >= stream[i]:
            new += 1
        other = list(stream)
        other[i] = new
        pairs.append((stream, other))
    return pairs
