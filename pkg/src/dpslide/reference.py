"""Slow pure-Python versions of the two one-shot algorithms.

They are assembled from the generic pieces in `sketches` and `window` and
follow the same rules and hash functions as the compiled engines, so on small
streams both must produce identical internal state and identical reports.
"""

from __future__ import annotations

import math

from .heavy_hitters import (_AMS_LABEL, _CS_LABEL, HeavyHitterReport, PrivacyConfig,
                            release_l1, release_l2)
from .hashing import derive_seed
from .mechanisms import LaplaceSampler
from .sketches import AmsSketch, CountSketchTable, MisraGriesSummary
from .window import LengthHistogram, SmoothHistogram, WindowCounter


class _L2Slot:
    def __init__(self, owner, start):
        self.owner = owner
        self.start = start
        self.time = start - 1
        self.ams = owner.ams_proto.fresh_like()
        self.cs = CountSketchTable(owner.theta, owner.cfg.sketch_failure, owner.cfg.n,
                                   owner.cs_seed, rows=owner.cfg.cs_rows,
                                   buckets=owner.cfg.cs_buckets,
                                   estimator=owner.cfg.estimator)
        self.counters: dict[int, WindowCounter] = {}

    def estimate(self):
        return self.ams.estimate_l2()

    def update(self, item):
        o = self.owner
        self.time += 1
        self.ams.update(item)
        self.cs.update(item)
        x = self.ams.estimate_l2()
        budget = o.cfg.budget_factor * x
        if item in self.counters:
            self.counters[item].update(item, budget)
        elif self.cs.estimate(item) >= 0.75 * o.theta * x:
            wc = WindowCounter(item, budget, max_window=o.cfg.window, lazy=True,
                               growth=o.cfg.growth, start_time=self.time - 1)
            wc.update(item, budget)
            self.counters[item] = wc
        for k, wc in self.counters.items():
            if k != item:
                wc.update(item)


class ReferenceL2:
    def __init__(self, cfg: PrivacyConfig):
        cfg.validate()
        self.cfg = cfg
        rho = min(cfg.ams_accuracy, 0.999)
        self.theta = cfg.cs_threshold
        self.ams_proto = AmsSketch.for_l2(rho, cfg.sketch_failure, cfg.n,
                                          derive_seed(cfg.seed, _AMS_LABEL),
                                          rows=cfg.ams_rows, reps=cfg.ams_reps)
        self.cs_seed = derive_seed(cfg.seed, _CS_LABEL)
        self.hist = SmoothHistogram(cfg.histogram_gap, lambda seed: None,
                                    max_window=cfg.window)
        self.hist.factory = lambda seed: _L2Slot(self, self.hist.time)
        self.time = 0

    def update(self, item):
        self.time += 1
        self.hist.update(item)

    def extend(self, items):
        for it in items:
            self.update(int(it))

    def prequery(self, window):
        a, x_hat, slot = self.hist.query(window)
        budget = self.cfg.budget_factor * x_hat
        cands = {k: wc.query(window, budget) for k, wc in slot.counters.items()}
        return a - 1, x_hat, cands

    def query(self, window, noise_seed=None):
        a, x_hat, cands = self.prequery(window)
        sampler = LaplaceSampler(noise_seed) if noise_seed is not None else None
        entries, norm = release_l2(x_hat, cands, self.cfg, sampler)
        return HeavyHitterReport(entries, window, norm, {"a": a})


class _L1Slot:
    def __init__(self, owner, start):
        self.owner = owner
        self.start = start
        self.time = start - 1
        self.mg = MisraGriesSummary(owner.cfg.alpha / 16)
        self.counters: dict[int, WindowCounter] = {}

    def update(self, item):
        o = self.owner
        self.time += 1
        self.mg.update(item)
        length = self.time - self.start + 1
        budget = o.cfg.alpha / 32 * length
        if item in self.counters:
            self.counters[item].update(item, budget)
        elif self.mg.estimate(item) >= 0.75 * o.cfg.alpha / 16 * length:
            wc = WindowCounter(item, budget, max_window=o.cfg.window, lazy=True,
                               growth=o.cfg.growth, start_time=self.time - 1)
            wc.update(item, budget)
            self.counters[item] = wc
        for k, wc in self.counters.items():
            if k != item:
                wc.update(item)


class ReferenceL1:
    def __init__(self, cfg: PrivacyConfig):
        cfg.validate()
        self.cfg = cfg
        self.hist = LengthHistogram(lambda seed: None, ratio=1.01, max_window=cfg.window)
        self.hist.factory = lambda seed: _L1Slot(self, self.hist.time)
        self.time = 0

    def update(self, item):
        self.time += 1
        self.hist.update(item)

    def extend(self, items):
        for it in items:
            self.update(int(it))

    def prequery(self, window):
        a, _, slot = self.hist.query(window)
        budget = self.cfg.alpha / 32 * (self.time - slot.start + 1)
        return a - 1, {k: wc.query(window, budget) for k, wc in slot.counters.items()}

    def query(self, window, noise_seed=None):
        a, cands = self.prequery(window)
        sampler = LaplaceSampler(noise_seed) if noise_seed is not None else None
        return HeavyHitterReport(release_l1(window, cands, self.cfg, sampler), window, None,
                                 {"a": a})


def reference_window_l2(freqs) -> float:
    return math.sqrt(sum(v * v for v in freqs.values()))
