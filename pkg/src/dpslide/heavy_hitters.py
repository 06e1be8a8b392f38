"""Private sliding-window heavy hitters for the L2 and L1 norms.

`L2HeavyHitters` keeps a smooth histogram of AMS sketches, a CountSketch per
histogram timestamp and window counters for the items each CountSketch
flags.  `L1HeavyHitters` does the same with deterministic timestamps and
Misra-Gries summaries.  A query picks the timestamp that sandwiches the
window start, reads the counters of that timestamp and releases the items
that pass a noisy threshold.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .hashing import derive_seed
from .mechanisms import LaplaceSampler
from .sketches import AmsSketch, CountSketchTable, ams_dimensions, sort_report

_NOISE_LABEL = 0x6E6F
_AMS_LABEL = 11
_CS_LABEL = 12

# int64 cells of sketch state per histogram timestamp; beyond this the
# formula sizes cannot be held for the dozens of timestamps a run keeps
MAX_SLOT_CELLS = 1 << 20
# per-item hash values are tabulated when the universe is small enough
MAX_HASH_TABLE = 1 << 22


@dataclass
class PrivacyConfig:
    """Parameters shared by both one-shot algorithms.

    `kappa` scales the calibration constants: the histogram gap, the AMS
    accuracy, the CountSketch threshold and the counter budget all grow with
    kappa * epsilon.  `kappa_w` scales the window length below which the
    exact-window fallback answers the query.  The sketch size fields override
    the formula sizes, which are far too large at desk scale.

    `l2_noise="flat"` drops the 1/log m factor from the norm's noise scale.
    `l1_noise="log_scaled"` uses 1/(eps alpha log m) instead of 2/eps.
    """

    alpha: float
    epsilon: float
    window: int
    n: int
    m: int
    delta: float = 1e-3
    kappa: float = 1.0
    kappa_w: float = 1.0
    noise: bool = True
    seed: int = 0
    gap: float | None = None
    ams_rows: int | None = None
    ams_reps: int | None = None
    cs_rows: int | None = None
    cs_buckets: int | None = None
    estimator: str = "median"
    growth: float = 1.25
    l2_noise: str = "log_scaled"
    l1_noise: str = "sensitivity"

    def validate(self) -> None:
        if not (0 < self.alpha < 1):
            raise ValueError("alpha must lie in (0, 1)")
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")
        if self.n < 1 or self.m < 1 or self.window < 1:
            raise ValueError("n, m and window must be at least 1")
        if self.kappa <= 0 or self.kappa_w < 0:
            raise ValueError("kappa must be positive and kappa_w non-negative")
        if self.gap is not None and not (0 < self.gap < 1):
            raise ValueError("gap must lie in (0, 1)")
        if self.growth < 1:
            raise ValueError("growth must be at least 1")
        if self.estimator not in ("median", "mean_abs"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.l2_noise not in ("log_scaled", "flat"):
            raise ValueError(f"unknown l2_noise {self.l2_noise!r}")
        if self.l1_noise not in ("sensitivity", "log_scaled"):
            raise ValueError(f"unknown l1_noise {self.l1_noise!r}")

    @property
    def log_m(self) -> float:
        return math.log2(max(self.m, 2))

    @property
    def lam(self) -> float:
        """kappa * epsilon / log m, the quantity every calibration constant scales with."""
        return self.kappa * self.epsilon / self.log_m

    @property
    def histogram_gap(self) -> float:
        if self.gap is not None:
            return self.gap
        return (self.lam / 1000) ** 2

    @property
    def ams_accuracy(self) -> float:
        return self.lam / 500

    @property
    def cs_threshold(self) -> float:
        return min(self.alpha / 16, self.alpha**3 * self.lam / 500)

    @property
    def budget_factor(self) -> float:
        """Counter budget per unit of the L2 estimate."""
        return self.alpha**3 * self.lam / 1000

    @property
    def sketch_failure(self) -> float:
        return min(0.5, 1.0 / max(self.m, 2) ** 2)

    @property
    def fallback_cutoff(self) -> float:
        return self.kappa_w * self.log_m**5 / (self.alpha**2 * self.epsilon**2)

    @property
    def epsilon_floor(self) -> float:
        return self.kappa * 1000 * self.log_m / (self.alpha**3 * math.sqrt(self.window))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class HeavyHitterReport:
    entries: list
    window: int
    released_norm: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def items(self) -> list[int]:
        return [k for k, _ in self.entries]

    def as_dict(self) -> dict:
        out = {
            "window": self.window,
            "entries": [{"item": int(k), "noisy_freq": float(v)} for k, v in self.entries],
        }
        if self.released_norm is not None:
            out["released_norm"] = float(self.released_norm)
        return out


def release_l2(x_hat: float, candidates: dict, cfg: PrivacyConfig, sampler):
    """Noisy threshold test; returns (sorted entries, released norm).

    Candidates are visited by ascending item id so the noise draws are
    reproducible.  With `sampler=None` every noise term is zero.
    """
    log_m = cfg.log_m
    x_scale = x_hat / 40 if cfg.l2_noise == "flat" else x_hat / (40 * log_m)
    f_scale = cfg.alpha * x_hat / (75 * log_m)
    draw = sampler is not None
    big_x = sampler.sample(x_scale) if draw and x_scale > 0 else 0.0
    cut = 0.75 * cfg.alpha * (x_hat + big_x)
    entries = []
    for k in sorted(candidates):
        y = z = 0.0
        if draw and f_scale > 0:
            y = sampler.sample(f_scale)
            z = sampler.sample(f_scale)
        noisy = candidates[k] + z
        if noisy >= cut + y:
            entries.append((int(k), float(noisy)))
    return sort_report(entries), x_hat + big_x


def release_l1(window: int, candidates: dict, cfg: PrivacyConfig, sampler):
    if cfg.l1_noise == "log_scaled":
        scale = 1.0 / (cfg.epsilon * cfg.alpha * cfg.log_m)
    else:
        scale = 2.0 / cfg.epsilon
    cut = 0.75 * cfg.alpha * window
    entries = []
    for k in sorted(candidates):
        z = sampler.sample(scale) if sampler is not None else 0.0
        noisy = candidates[k] + z
        if noisy >= cut:
            entries.append((int(k), float(noisy)))
    return sort_report(entries)


def _exact_candidates(recent, window):
    vals = list(recent)[-window:]
    counts: dict[int, int] = {}
    for v in vals:
        counts[v] = counts.get(v, 0) + 1
    return counts


class _EngineBase:
    """Capacity management and query plumbing shared by both engines."""

    def __init__(self, cfg: PrivacyConfig):
        cfg.validate()
        self.cfg = cfg
        self.time = 0
        self._queries = 0
        self.pool = K.new_counter_pool(cfg.n, 1024, 256)
        cut = cfg.fallback_cutoff
        self._recent = deque(maxlen=int(min(cfg.window, cut))) if cut >= 1 else None

    def _check_items(self, items):
        arr = np.ascontiguousarray(items, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("items must be one-dimensional")
        if arr.size and (arr.min() < 1 or arr.max() > self.cfg.n):
            bad = arr[(arr < 1) | (arr > self.cfg.n)][0]
            raise ValueError(f"item {bad} outside universe [1, {self.cfg.n}]")
        return arr

    def update(self, item: int) -> None:
        self.extend([item])

    def extend(self, items) -> None:
        arr = self._check_items(items)
        pos = 0
        while pos < arr.size:
            done = self._run(arr[pos:])
            self.time += done
            pos += done
            if pos < arr.size:
                self._grow()
        if self._recent is not None:
            self._recent.extend(arr.tolist())

    def _grow(self) -> None:
        slots = self.slots
        s = int(slots.meta[0])
        if slots.meta[1] < 1:
            self.slots = K.grow_slots(slots, 2 * slots.time.shape[0])
        if self.pool.meta[1] < s + 1:
            cap = self.pool.C.shape[0]
            K.sweep_dead(self.pool)
            if self.pool.meta[1] < max(s + 1, cap // 4):
                self.pool = K.grow_counters(self.pool, max(2 * cap, cap + s + 1))
        if self.pool.meta[0] < s + 1:
            cap = self.pool.N.shape[0]
            self.pool = K.grow_nodes(self.pool, max(2 * cap, cap + s + 1))

    # -- inspection -------------------------------------------------------

    @property
    def live_slots(self) -> int:
        return int(self.slots.meta[0])

    def timestamps(self) -> np.ndarray:
        s = self.live_slots
        return self.slots.time[self.slots.order[:s]].copy()

    def select(self, window: int) -> int:
        """0-based index a of the latest timestamp at or before the window start."""
        start = self.time - window + 1
        return int(np.searchsorted(self.timestamps(), start, side="right")) - 1

    def counter_sizes(self):
        """(running totals, node counts) over all live counters."""
        totals, lens = [], []
        s = self.live_slots
        cap = int(self.pool.meta[3]) + 1
        tb = np.empty(cap, np.int64)
        lb = np.empty(cap, np.int32)
        for q in range(s):
            j = self.slots.order[q]
            k = K.slot_counter_sizes(self.pool, self.slots.chead, j, tb, lb)
            totals.extend(tb[:k].tolist())
            lens.extend(lb[:k].tolist())
        return np.array(totals, dtype=np.int64), np.array(lens, dtype=np.int64)

    def counter_profile(self):
        """(count since oldest node, node count, enforced budget) over all live counters."""
        cols = ([], [], [])
        cap = int(self.pool.meta[3]) + 1
        fb = np.empty(cap, np.int64)
        lb = np.empty(cap, np.int64)
        bb = np.empty(cap, np.float64)
        for q in range(self.live_slots):
            k = K.slot_counter_profile(self.pool, self.slots.chead, self.slots.order[q], fb, lb, bb)
            for col, buf in zip(cols, (fb, lb, bb)):
                col.extend(buf[:k].tolist())
        return (np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.int64),
                np.array(cols[2], dtype=np.float64))

    def tracked_per_slot(self) -> np.ndarray:
        s = self.live_slots
        out = np.zeros(s, dtype=np.int64)
        cap = int(self.pool.meta[3]) + 1
        tb = np.empty(cap, np.int64)
        lb = np.empty(cap, np.int32)
        for q in range(s):
            out[q] = K.slot_counter_sizes(self.pool, self.slots.chead, self.slots.order[q], tb, lb)
        return out

    def space_stats(self) -> dict:
        return {
            "live_slots": self.live_slots,
            "live_counters": int(self.pool.meta[3]),
            "live_counter_nodes": int(self.pool.meta[2]),
            "counters_created": int(self.pool.meta[5]),
            "counter_touches": int(self.pool.meta[6]),
        }

    # -- queries -------------------------------------------------------------

    def _check_window(self, window):
        if self.time == 0:
            raise ValueError("no data")
        w = self.cfg.window if window is None else int(window)
        if w < 1 or w > self.time or w > self.cfg.window:
            raise ValueError(f"window {w} outside [1, {min(self.time, self.cfg.window)}]")
        return w

    def _sampler(self, noise, noise_seed):
        use = self.cfg.noise if noise is None else noise
        self._queries += 1
        if not use:
            return None
        if noise_seed is None:
            noise_seed = derive_seed(self.cfg.seed, _NOISE_LABEL, self._queries)
        return LaplaceSampler(noise_seed)

    def _slot_candidates(self, slot, budget, start):
        cap = int(self.pool.meta[3]) + 1
        items = np.empty(cap, np.int64)
        ests = np.empty(cap, np.int64)
        cut = self.time - self.cfg.window + 1
        k = K.slot_counters_query(self.pool, self.slots.chead, slot, float(budget),
                                  cut, start, items, ests)
        return {int(i): int(e) for i, e in zip(items[:k], ests[:k])}

    def uses_fallback(self, window: int) -> bool:
        return self._recent is not None and window <= self.cfg.fallback_cutoff


class L2HeavyHitters(_EngineBase):
    """Private L2 heavy hitters over the most recent W updates."""

    def __init__(self, cfg: PrivacyConfig):
        super().__init__(cfg)
        if cfg.epsilon <= cfg.epsilon_floor:
            warnings.warn(
                f"epsilon={cfg.epsilon} is at or below {cfg.epsilon_floor:.4g}; "
                "the accuracy guarantees are not claimed in this regime",
                RuntimeWarning, stacklevel=2)
        rho = cfg.ams_accuracy
        sized = cfg.ams_rows is not None and cfg.ams_reps is not None
        if not (0 < rho < 1) and not sized:
            raise ValueError(f"AMS accuracy {rho:.4g} is outside (0, 1); set ams_rows and ams_reps")
        rho = min(rho, 0.999)
        gap = cfg.histogram_gap
        if not (0 < gap < 1):
            raise ValueError(f"histogram gap {gap:.4g} is outside (0, 1); set gap explicitly")
        theta = cfg.cs_threshold
        self._check_sizes(rho, theta)
        self.ams = AmsSketch.for_l2(rho, cfg.sketch_failure, cfg.n,
                                    derive_seed(cfg.seed, _AMS_LABEL),
                                    rows=cfg.ams_rows, reps=cfg.ams_reps)
        self.cs = CountSketchTable(theta, cfg.sketch_failure, cfg.n,
                                   derive_seed(cfg.seed, _CS_LABEL),
                                   rows=cfg.cs_rows, buckets=cfg.cs_buckets,
                                   estimator=cfg.estimator)
        self.gap = gap
        self.theta = theta
        cap = 64
        base = K.new_slot_arrays(cap)
        self.slots = K.L2Slots(
            acc=np.zeros((cap, self.ams.rows * self.ams.reps), np.int64),
            sumsq=np.zeros((cap, self.ams.reps), np.int64),
            cs=np.zeros((cap, self.cs.rows, self.cs.buckets), np.int64),
            x=np.zeros(cap, np.float64),
            **base,
        )
        width = self.ams.rows * self.ams.reps + 2 * self.cs.rows
        if (cfg.n + 1) * width <= MAX_HASH_TABLE:
            self._tables = K.l2_hash_tables(cfg.n, self.ams.family.coeffs, self.cs.signs.coeffs,
                                            self.cs.hashes.coeffs, self.cs.buckets)
        else:
            empty = np.zeros((0, 1), np.int64)
            self._tables = (empty, empty, empty)

    def _check_sizes(self, rho, theta):
        cfg = self.cfg
        rows, reps = ams_dimensions(rho / 3.0, cfg.sketch_failure)
        rows, reps = cfg.ams_rows or rows, cfg.ams_reps or reps
        cs_rows = cfg.cs_rows or math.ceil(8 * math.log2(cfg.n / cfg.sketch_failure))
        cs_buckets = cfg.cs_buckets or math.ceil(6.0 / theta**2)
        cells = rows * reps + reps + cs_rows * cs_buckets
        if cells > MAX_SLOT_CELLS:
            raise ValueError(
                f"sketches need {cells:.3g} cells per timestamp (AMS {rows}x{reps}, "
                f"CountSketch {cs_rows}x{cs_buckets}); set the sketch sizes or raise kappa")

    def _run(self, items):
        cfg = self.cfg
        return K.l2_run(items, self.time, self.slots, self.pool,
                        self.ams.family.coeffs, self.cs.signs.coeffs, self.cs.hashes.coeffs,
                        self.ams.reps, self.ams.rows, self.cs.buckets, self.gap,
                        0.75 * self.theta, cfg.budget_factor, cfg.growth,
                        cfg.window, cfg.estimator == "mean_abs", *self._tables)

    def estimates(self) -> np.ndarray:
        s = self.live_slots
        return self.slots.x[self.slots.order[:s]].copy()

    def prequery(self, window=None):
        """Noise-free internals of a query: (a, L2 estimate, {item: estimate}).

        Exact-window fallback queries return a = -1.
        """
        w = self._check_window(window)
        if self.uses_fallback(w):
            counts = _exact_candidates(self._recent, w)
            return -1, math.sqrt(sum(v * v for v in counts.values())), counts
        a = self.select(w)
        j = int(self.slots.order[a])
        x_hat = float(self.slots.x[j])
        cands = self._slot_candidates(j, self.cfg.budget_factor * x_hat, self.time - w + 1)
        return a, x_hat, cands

    def query(self, window=None, noise=None, noise_seed=None) -> HeavyHitterReport:
        w = self._check_window(window)
        sampler = self._sampler(noise, noise_seed)
        a, x_hat, cands = self.prequery(w)
        entries, norm = release_l2(x_hat, cands, self.cfg, sampler)
        meta = {"a": a, "live_slots": self.live_slots, "candidates": len(cands),
                "l2_estimate": x_hat, "fallback": a < 0}
        return HeavyHitterReport(entries, w, norm, meta)


class L1HeavyHitters(_EngineBase):
    """Pure-DP L1 heavy hitters over the most recent W updates."""

    ratio = 1.01

    def __init__(self, cfg: PrivacyConfig):
        super().__init__(cfg)
        # the L1 algorithm answers from sketches at every window length
        self._recent = None
        self.mg_capacity = math.ceil(16 / cfg.alpha)
        bits = max(3, int(math.ceil(math.log2(2 * self.mg_capacity))))
        self.hsize = 1 << bits
        cap = 64
        base = K.new_slot_arrays(cap)
        self.slots = K.L1Slots(
            keys=np.zeros((cap, self.mg_capacity), np.int64),
            vals=np.zeros((cap, self.mg_capacity), np.int64),
            cnt=np.zeros(cap, np.int64),
            table=np.full((cap, self.hsize), K.NONE, np.int32),
            **base,
        )
        self._shift = np.uint64(64 - bits)
        self.create_frac = 0.75 * cfg.alpha / 16
        self.budget_frac = cfg.alpha / 32

    def _run(self, items):
        cfg = self.cfg
        return K.l1_run(items, self.time, self.slots, self.pool, self.mg_capacity,
                        self.hsize - 1, self._shift, self.create_frac, self.budget_frac,
                        cfg.growth, self.ratio, cfg.window)

    def mg_estimate(self, q: int, item: int) -> int:
        """Misra-Gries estimate of `item` in the q-th live timestamp (0-based)."""
        j = int(self.slots.order[q])
        return int(K.mg_lookup(self.slots.keys, self.slots.vals, self.slots.table, j, item, self.hsize - 1, self._shift))

    def prequery(self, window=None):
        w = self._check_window(window)
        a = self.select(w)
        j = int(self.slots.order[a])
        budget = self.budget_frac * (self.time - int(self.slots.time[j]) + 1)
        return a, self._slot_candidates(j, budget, self.time - w + 1)

    def query(self, window=None, noise=None, noise_seed=None) -> HeavyHitterReport:
        w = self._check_window(window)
        sampler = self._sampler(noise, noise_seed)
        a, cands = self.prequery(w)
        entries = release_l1(w, cands, self.cfg, sampler)
        meta = {"a": a, "live_slots": self.live_slots, "candidates": len(cands)}
        return HeavyHitterReport(entries, w, None, meta)


class SlidingL2Norm(L2HeavyHitters):
    """The smooth histogram of AMS sketches on its own, without counters.

    Useful for checking the window-norm estimate; no item is ever tracked.
    """

    def _run(self, items):
        cfg = self.cfg
        return K.l2_run(items, self.time, self.slots, self.pool,
                        self.ams.family.coeffs, self.cs.signs.coeffs, self.cs.hashes.coeffs,
                        self.ams.reps, self.ams.rows, self.cs.buckets, self.gap,
                        math.inf, cfg.budget_factor, cfg.growth,
                        cfg.window, False, *self._tables)

    def estimate(self, window=None):
        """(a, timestamp t_a, L2 estimate of instance a) for a window."""
        w = self._check_window(window)
        a = self.select(w)
        j = int(self.slots.order[a])
        return a, int(self.slots.time[j]), float(self.slots.x[j])
