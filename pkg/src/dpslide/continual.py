"""Continual release of heavy hitters over a sliding window.

The stream is cut into aligned blocks at several levels, block lengths
doubling from one level to the next.  Each block runs its own Misra-Gries
summary.  When a block completes, its counts get Laplace noise once and are
frozen.  At every step the current window is covered greedily by at most two
blocks per level, and the noisy block counts are added up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hashing import derive_seed
from .heavy_hitters import HeavyHitterReport
from .mechanisms import LaplaceSampler
from .sketches import MisraGriesSummary, sort_report

_SEALED_LABEL = 0x5EA1
_ACTIVE_LABEL = 0xAC71

NOISE_SCALES = ("derived", "alpha_sqrt_w", "sqrt_alpha_w")


def level_count(alpha: float, epsilon: float, window: int) -> int:
    """Number of levels before capping, ceil(log(100 eps sqrt(W) / alpha) + log log W) + 2."""
    lw = max(math.log2(window), 1.0)
    return math.ceil(math.log2(100 * epsilon / alpha * math.sqrt(window)) + math.log2(lw)) + 2


def raw_block_length(level: int, alpha: float, window: int) -> float:
    lw = max(math.log2(window), 1.0)
    return 2.0 ** (level - 2) * alpha * math.sqrt(window) / (100 * lw)


def block_length(level: int, alpha: float, window: int) -> int:
    """Integer block length: the raw length rounded to a power of two, at least 1.

    Powers of two keep the blocks of every level nested inside the blocks
    of the level above, which the greedy cover relies on.
    """
    raw = raw_block_length(level, alpha, window)
    return 2 ** max(0, round(math.log2(raw)))


@dataclass
class ContinualConfig:
    alpha: float
    epsilon: float
    window: int
    n: int
    seed: int = 0
    noise: bool = True
    noise_scale: str = "derived"   # one of NOISE_SCALES
    threshold: float | None = None  # report cut; defaults to alpha*sqrt(W)/2

    def validate(self) -> None:
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"window must be a positive integer, got {self.window!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.noise_scale not in NOISE_SCALES:
            raise ValueError(f"noise_scale must be one of {NOISE_SCALES}")

    @property
    def log_w(self) -> float:
        return max(math.log2(self.window), 1.0)

    @property
    def phi(self) -> float:
        return min(self.epsilon, 1.0)

    @property
    def block_sensitivity(self) -> float:
        return self.phi * self.alpha * math.sqrt(self.window) / (16 * self.log_w ** 3)

    @property
    def laplace_scale(self) -> float:
        a, w, lw = self.alpha, self.window, self.log_w
        if self.noise_scale == "alpha_sqrt_w":
            return a * math.sqrt(w) / (16 * lw ** 2)
        if self.noise_scale == "sqrt_alpha_w":
            return math.sqrt(a * w) / (8 * lw ** 2)
        # budget eps / (2 log W) per block
        return 2 * lw * self.block_sensitivity / self.epsilon

    @property
    def report_threshold(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return self.alpha * math.sqrt(self.window) / 2


@dataclass
class Block:
    level: int
    start: int          # first position covered (1-based)
    length: int
    summary: MisraGriesSummary
    keys: np.ndarray | None = None     # filled when sealed
    counts: np.ndarray | None = None
    noisy: np.ndarray | None = None

    @property
    def end(self) -> int:
        return self.start + self.length - 1

    @property
    def sealed(self) -> bool:
        return self.keys is not None


@dataclass
class Level:
    index: int           # 1-based level number
    length: int
    mg_alpha: float
    sealed: dict[int, Block] = field(default_factory=dict)   # keyed by start
    active: Block | None = None


class ContinualHeavyHitters:
    """Per-step heavy-hitter reports over the most recent W updates."""

    def __init__(self, cfg: ContinualConfig):
        cfg.validate()
        self.cfg = cfg
        self.time = 0
        self.total_levels = level_count(cfg.alpha, cfg.epsilon, cfg.window)
        self.levels: list[Level] = []
        seen = set()
        for lv in range(1, self.total_levels + 1):
            length = block_length(lv, cfg.alpha, cfg.window)
            if length > cfg.window:
                break
            if length in seen:
                # same length as a lower level: identical blocks, kept once
                continue
            seen.add(length)
            tau = cfg.block_sensitivity / length
            self.levels.append(Level(lv, length, min(tau, 0.5)))
        self._by_length = {lev.length: lev for lev in self.levels}

    @property
    def lengths(self) -> list[int]:
        return [lev.length for lev in self.levels]

    # -- updates -------------------------------------------------------

    def update(self, item: int) -> HeavyHitterReport:
        item = int(item)
        if not (1 <= item <= self.cfg.n):
            raise ValueError(f"item {item} outside universe [1, {self.cfg.n}]")
        self.time += 1
        t = self.time
        for lev in self.levels:
            if lev.active is None:
                lev.active = Block(lev.index, t, lev.length, MisraGriesSummary(lev.mg_alpha))
            lev.active.summary.update(item)
            if lev.active.end == t:
                self._seal(lev, lev.active)
                lev.active = None
            self._expire(lev)
        return self.report()

    def extend(self, items):
        last = None
        for it in items:
            last = self.update(it)
        return last

    def _seal(self, lev: Level, block: Block) -> None:
        snap = block.summary.snapshot()
        keys = np.fromiter(snap.keys(), dtype=np.int64, count=len(snap))
        counts = np.fromiter(snap.values(), dtype=np.float64, count=len(snap))
        order = np.argsort(keys)
        block.keys = keys[order]
        block.counts = counts[order]
        if self.cfg.noise and block.keys.size:
            sampler = LaplaceSampler(derive_seed(self.cfg.seed, _SEALED_LABEL, lev.index, block.start))
            block.noisy = block.counts + sampler.sample(self.cfg.laplace_scale, block.keys.size)
        else:
            block.noisy = block.counts.copy()
        block.summary = None
        lev.sealed[block.start] = block

    def _expire(self, lev: Level) -> None:
        # sealed blocks are inserted in start order, so expired ones lead
        lo = self.time - self.cfg.window + 1
        sealed = lev.sealed
        while sealed:
            start = next(iter(sealed))
            if sealed[start].end >= lo:
                break
            del sealed[start]

    # -- cover and report ----------------------------------------------

    def window_start(self) -> int:
        return max(1, self.time - self.cfg.window + 1)

    def cover(self) -> list[Block]:
        """Greedy aligned cover of [first level-1 boundary >= window start, t]."""
        t = self.time
        s1 = self.levels[0].length
        pos = ((self.window_start() - 1 + s1 - 1) // s1) * s1 + 1
        out = []
        while pos <= t:
            chosen = None
            for lev in reversed(self.levels):
                if (pos - 1) % lev.length == 0 and pos + lev.length - 1 <= t:
                    chosen = lev.sealed[pos]
                    break
            if chosen is None:
                # shorter than one level-1 block remains: the active block
                chosen = self.levels[0].active
                out.append(chosen)
                break
            out.append(chosen)
            pos += chosen.length
        return out

    def estimates(self, noisy: bool = True) -> dict[int, float]:
        """Stitched frequency estimates for every item seen in the cover."""
        keys, vals = [], []
        for block in self.cover():
            if block.sealed:
                keys.append(block.keys)
                vals.append(block.noisy if noisy else block.counts)
            else:
                snap = block.summary.snapshot()
                k = np.fromiter(sorted(snap), dtype=np.int64, count=len(snap))
                v = np.array([snap[x] for x in k.tolist()], dtype=np.float64)
                if noisy and self.cfg.noise and k.size:
                    sampler = LaplaceSampler(derive_seed(self.cfg.seed, _ACTIVE_LABEL, self.time))
                    v = v + sampler.sample(self.cfg.laplace_scale, k.size)
                keys.append(k)
                vals.append(v)
        if not keys:
            return {}
        k = np.concatenate(keys)
        v = np.concatenate(vals)
        uniq, inv = np.unique(k, return_inverse=True)
        sums = np.bincount(inv, weights=v, minlength=uniq.size)
        return dict(zip(uniq.tolist(), sums.tolist()))

    def report(self) -> HeavyHitterReport:
        cut = self.cfg.report_threshold
        est = self.estimates(noisy=True)
        entries = sort_report([(k, v) for k, v in est.items() if v >= cut])
        return HeavyHitterReport(entries, self.cfg.window, None, {"t": self.time})

    def space_stats(self) -> dict:
        return {
            "levels": len(self.levels),
            "sealed_blocks": sum(len(lev.sealed) for lev in self.levels),
            "tracked_keys": sum(int(b.keys.size) for lev in self.levels for b in lev.sealed.values()),
        }
