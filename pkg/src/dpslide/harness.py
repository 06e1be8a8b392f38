"""Run drivers: one-shot and continual runs, repeated trials and their metrics.

Every document written here is a JSON object on a single line with sorted
keys, and embeds the full run configuration.  The field layout is fixed by
the JSON schemas at the bottom of this module (see also docs/output_format.md).
"""

from __future__ import annotations

import json
import math
import time
import warnings
from collections import Counter, deque
from dataclasses import asdict, dataclass, fields, replace

import jsonschema
import numpy as np

from .continual import NOISE_SCALES, ContinualConfig, ContinualHeavyHitters
from .hashing import derive_seed
from .heavy_hitters import L1HeavyHitters, L2HeavyHitters, PrivacyConfig
from .oracle import exact_heavy_hitters, exact_lp, exact_window_freqs
from .streams import GeneratorSpec, generate_stream, parse_stream

MODES = ("oneshot-l2", "oneshot-l1", "continual", "oracle")

_GEN_LABEL = 0x67656E
_TRIAL_LABEL = 0x747269


@dataclass
class RunConfig:
    mode: str = "oneshot-l2"
    alpha: float = 0.2
    epsilon: float = 1.0
    delta: float = 1e-3
    window: int = 1000
    n: int = 1000
    m: int | None = None           # required with a generator; taken from the file otherwise
    kappa: float = 1.0
    kappa_w: float = 1.0
    noise: bool = True
    seed: int = 0
    input: str | None = None       # path, or "-" for stdin
    generator: str | None = None   # e.g. "planted:item=7,rho=0.05"
    output: str | None = None      # path; stdout when unset
    trials: int = 1
    gap: float | None = None
    ams_rows: int | None = None
    ams_reps: int | None = None
    cs_rows: int | None = None
    cs_buckets: int | None = None
    noise_scale: str = "derived"   # continual mode only
    failure_exponent: float = 1.0
    timing: bool = True

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0 < self.delta < 1):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        for name in ("window", "n", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.kappa <= 0 or self.kappa_w < 0:
            raise ValueError("kappa must be positive and kappa_w non-negative")
        if self.failure_exponent <= 0:
            raise ValueError("failure_exponent must be positive")
        if self.noise_scale not in NOISE_SCALES:
            raise ValueError(f"noise_scale must be one of {NOISE_SCALES}")
        if (self.input is None) == (self.generator is None):
            raise ValueError("exactly one of input and generator must be given")
        if self.generator is not None:
            if self.m is None or self.m < 1:
                raise ValueError("m must be given (and positive) with a generator")
            GeneratorSpec.parse(self.generator, self.m, self.n)
        if self.m is not None:
            if self.m < 1:
                raise ValueError("m must be at least 1")
            if self.window > self.m:
                raise ValueError(f"window {self.window} exceeds stream length m={self.m}")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ------------------------------------------------------------------ inputs

def load_stream(cfg: RunConfig, seed: int | None = None) -> np.ndarray:
    """The run's stream: generated from the generator description, or read once from the input."""
    if cfg.generator is not None:
        gseed = derive_seed(cfg.seed if seed is None else seed, _GEN_LABEL)
        spec = GeneratorSpec.parse(cfg.generator, cfg.m, cfg.n, gseed)
        return generate_stream(spec)
    stream = parse_stream(cfg.input, cfg.n)
    if cfg.m is not None and stream.size != cfg.m:
        raise ValueError(f"stream has {stream.size} items but m={cfg.m} was given")
    return stream


def _check_stream(cfg: RunConfig, stream) -> None:
    if len(stream) == 0:
        raise ValueError("the stream is empty")
    if cfg.window > len(stream):
        raise ValueError(f"window {cfg.window} exceeds stream length {len(stream)}")


def privacy_config(cfg: RunConfig, m: int, seed: int) -> PrivacyConfig:
    return PrivacyConfig(
        alpha=cfg.alpha, epsilon=cfg.epsilon, window=cfg.window, n=cfg.n, m=m,
        delta=cfg.delta, kappa=cfg.kappa, kappa_w=cfg.kappa_w, noise=cfg.noise, seed=seed,
        gap=cfg.gap, ams_rows=cfg.ams_rows, ams_reps=cfg.ams_reps,
        cs_rows=cfg.cs_rows, cs_buckets=cfg.cs_buckets,
    )


def continual_config(cfg: RunConfig, seed: int) -> ContinualConfig:
    return ContinualConfig(alpha=cfg.alpha, epsilon=cfg.epsilon, window=cfg.window, n=cfg.n,
                           seed=seed, noise=cfg.noise, noise_scale=cfg.noise_scale)


# ------------------------------------------------------------------ single runs

def _oneshot(cfg: RunConfig, stream, seed: int):
    """(report, engine, seconds) for one pass over `stream`."""
    _check_stream(cfg, stream)
    pc = privacy_config(cfg, len(stream), seed)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        engine = L2HeavyHitters(pc) if cfg.mode == "oneshot-l2" else L1HeavyHitters(pc)
    engine.extend(stream)
    report = engine.query(cfg.window)
    return report, engine, time.perf_counter() - start


def run_oneshot(cfg: RunConfig, stream=None) -> dict:
    """Feed the stream once, query at the final position and build the report document."""
    cfg.validate()
    if cfg.mode not in ("oneshot-l2", "oneshot-l1"):
        raise ValueError(f"run_oneshot needs a one-shot mode, got {cfg.mode!r}")
    if stream is None:
        stream = load_stream(cfg)
    report, engine, secs = _oneshot(cfg, stream, cfg.seed)
    doc = {
        "kind": "report",
        "mode": cfg.mode,
        "config": cfg.as_dict(),
        "m": int(len(stream)),
        "report": report.as_dict(),
        "space": engine.space_stats(),
    }
    if cfg.timing:
        doc["timing"] = {"wall_time_s": secs}
    return doc


def iter_continual(cfg: RunConfig, stream, seed: int | None = None):
    """Yield (t, report) once per stream position."""
    _check_stream(cfg, stream)
    engine = ContinualHeavyHitters(continual_config(cfg, cfg.seed if seed is None else seed))
    for item in np.asarray(stream).tolist():
        rep = engine.update(item)
        yield engine.time, rep


def run_continual(cfg: RunConfig, stream=None):
    """Yield one document per position; the first one also carries the config."""
    cfg.validate()
    if stream is None:
        stream = load_stream(cfg)
    for t, rep in iter_continual(cfg, stream):
        line = {"t": t, "entries": rep.as_dict()["entries"]}
        if t == 1:
            line["config"] = cfg.as_dict()
        yield line


def run_oracle(cfg: RunConfig, stream=None) -> dict:
    cfg.validate()
    if stream is None:
        stream = load_stream(cfg)
    _check_stream(cfg, stream)
    freqs = exact_window_freqs(stream, len(stream), cfg.window)
    out = {}
    for p in (1, 2):
        must, must_not = exact_heavy_hitters(freqs, cfg.alpha, p)
        out[f"l{p}"] = {
            "norm": exact_lp(freqs, p),
            "must_report": [{"item": k, "freq": freqs[k]} for k in sorted(must)],
            "must_not_report_count": len(must_not),
        }
    return {"kind": "oracle", "mode": "oracle", "config": cfg.as_dict(),
            "m": int(len(stream)), "oracle": out}


# ------------------------------------------------------------------ metrics

def score_report(entries, freqs: dict, alpha: float, p: int, norm: float | None = None) -> dict:
    """Compare reported (item, estimate) pairs against exact window counts."""
    norm = exact_lp(freqs, p) if norm is None else norm
    must, must_not = exact_heavy_hitters(freqs, alpha, p)
    reported = [k for k, _ in entries]
    rep_set = set(reported)
    # items absent from the window have frequency 0 and belong to must_not
    bad = [k for k in reported if k in must_not or k not in freqs]
    errors = [abs(v - freqs.get(k, 0)) / norm if norm > 0 else 0.0 for k, v in entries]
    return {
        "recall": len(must & rep_set) / len(must) if must else 1.0,
        "precision": 1.0 - len(bad) / len(reported) if reported else 1.0,
        "violations": len(bad),
        "missed": len(must - rep_set),
        "reported": len(reported),
        "max_error": max(errors, default=0.0),
        "mean_error": float(np.mean(errors)) if errors else 0.0,
    }


def _quantiles(values) -> dict:
    if not values:
        return {"min": 0, "median": 0, "p90": 0, "max": 0}
    arr = np.asarray(values, dtype=np.float64)
    return {"min": float(arr.min()), "median": float(np.median(arr)),
            "p90": float(np.quantile(arr, 0.9)), "max": float(arr.max())}


def trial_seed(master: int, trial: int) -> int:
    return derive_seed(master, _TRIAL_LABEL, trial)


def _oneshot_trial(cfg: RunConfig, seed: int, stream=None) -> dict:
    if stream is None:
        stream = load_stream(cfg, seed)
    report, engine, secs = _oneshot(cfg, stream, seed)
    p = 2 if cfg.mode == "oneshot-l2" else 1
    freqs = exact_window_freqs(stream, len(stream), cfg.window)
    norm = exact_lp(freqs, p)
    score = score_report(report.entries, freqs, cfg.alpha, p, norm)
    score["error_bound_ok"] = score["max_error"] <= cfg.alpha / 4
    score["live_instances"] = engine.live_slots
    score["seed"] = seed
    score["wall_time_s"] = secs
    return score


def _continual_trial(cfg: RunConfig, seed: int, stream=None) -> dict:
    """Per-step scores over steps t >= W, using a running exact window count."""
    if stream is None:
        stream = load_stream(cfg, seed)
    window = cfg.window
    bound = cfg.alpha * math.sqrt(window)
    recent: deque = deque()
    counts: Counter = Counter()
    steps = full = clean = 0
    max_err = 0.0
    errs = []
    start = time.perf_counter()
    for t, rep in iter_continual(cfg, stream, seed):
        item = int(stream[t - 1])
        recent.append(item)
        counts[item] += 1
        if len(recent) > window:
            old = recent.popleft()
            counts[old] -= 1
            if counts[old] == 0:
                del counts[old]
        if t < window:
            continue
        steps += 1
        must = {k for k, v in counts.items() if v >= bound}
        got = set(rep.items)
        full += must <= got
        step_err = max((abs(v - counts.get(k, 0)) for k, v in rep.entries), default=0.0)
        clean += step_err <= bound / 2
        max_err = max(max_err, step_err)
        errs.append(step_err)
    return {
        "seed": seed,
        "steps": steps,
        "recall": full / steps if steps else 1.0,
        "error_ok_rate": clean / steps if steps else 1.0,
        "max_error": max_err / window,
        "mean_error": float(np.mean(errs)) / window if errs else 0.0,
        "precision": 1.0,
        "violations": 0,
        "error_bound_ok": max_err <= bound / 2,
        "live_instances": 0,
        "wall_time_s": time.perf_counter() - start,
    }


def run_experiment(cfg: RunConfig) -> dict:
    """Repeat the configured run over derived seeds and summarize against the oracle."""
    cfg.validate()
    if cfg.mode == "oracle":
        raise ValueError("run_experiment needs a one-shot or continual mode")
    fixed = None if cfg.generator is not None else load_stream(cfg)
    trials = []
    for i in range(cfg.trials):
        seed = trial_seed(cfg.seed, i)
        if cfg.mode == "continual":
            trials.append(_continual_trial(cfg, seed, fixed))
        else:
            trials.append(_oneshot_trial(cfg, seed, fixed))
    m = cfg.m if cfg.m is not None else int(len(fixed))
    if cfg.mode == "continual":
        failed = [tr["recall"] < 1.0 or not tr["error_bound_ok"] for tr in trials]
    else:
        failed = [tr["recall"] < 1.0 or tr["violations"] > 0 or not tr["error_bound_ok"]
                  for tr in trials]
    doc = {
        "kind": "metrics",
        "mode": cfg.mode,
        "config": cfg.as_dict(),
        "trials": cfg.trials,
        "recall": float(np.mean([tr["recall"] for tr in trials])),
        "recall_min": float(min(tr["recall"] for tr in trials)),
        "precision": float(np.mean([tr["precision"] for tr in trials])),
        "violations": int(sum(tr["violations"] for tr in trials)),
        "max_abs_error": float(max(tr["max_error"] for tr in trials)),
        "mean_abs_error": float(np.mean([tr["mean_error"] for tr in trials])),
        "error_normalizer": "W" if cfg.mode != "oneshot-l2" else "L2",
        "failure_rate": float(np.mean(failed)),
        "target_failure_rate": float(m ** -cfg.failure_exponent),
        "live_instances": _quantiles([tr["live_instances"] for tr in trials]),
        "per_trial": [{k: v for k, v in tr.items() if k != "wall_time_s"} for tr in trials],
    }
    if cfg.timing:
        doc["timing"] = {"wall_time_s": float(sum(tr["wall_time_s"] for tr in trials))}
    return doc


# ------------------------------------------------------------------ schemas

_ENTRY = {
    "type": "object",
    "required": ["item", "noisy_freq"],
    "properties": {"item": {"type": "integer", "minimum": 1}, "noisy_freq": {"type": "number"}},
    "additionalProperties": False,
}
_CONFIG = {"type": "object", "required": ["mode", "alpha", "epsilon", "window", "n", "seed"]}
_TIMING = {"type": "object", "required": ["wall_time_s"],
           "properties": {"wall_time_s": {"type": "number", "minimum": 0}}}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["kind", "mode", "config", "m", "report", "space"],
    "properties": {
        "kind": {"const": "report"},
        "mode": {"enum": ["oneshot-l2", "oneshot-l1"]},
        "config": _CONFIG,
        "m": {"type": "integer", "minimum": 1},
        "report": {
            "type": "object",
            "required": ["window", "entries"],
            "properties": {
                "window": {"type": "integer", "minimum": 1},
                "entries": {"type": "array", "items": _ENTRY},
                "released_norm": {"type": "number"},
            },
        },
        "space": {"type": "object", "required": ["live_slots", "live_counters"]},
        "timing": _TIMING,
    },
    "additionalProperties": False,
}

CONTINUAL_LINE_SCHEMA = {
    "type": "object",
    "required": ["t", "entries"],
    "properties": {
        "t": {"type": "integer", "minimum": 1},
        "entries": {"type": "array", "items": _ENTRY},
        "config": _CONFIG,
    },
    "additionalProperties": False,
}

_QUANTILES = {"type": "object", "required": ["min", "median", "p90", "max"]}

METRICS_SCHEMA = {
    "type": "object",
    "required": ["kind", "mode", "config", "trials", "recall", "recall_min", "precision",
                 "violations", "max_abs_error", "mean_abs_error", "error_normalizer",
                 "failure_rate", "target_failure_rate", "live_instances", "per_trial"],
    "properties": {
        "kind": {"const": "metrics"},
        "mode": {"enum": ["oneshot-l2", "oneshot-l1", "continual"]},
        "config": _CONFIG,
        "trials": {"type": "integer", "minimum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "recall_min": {"type": "number", "minimum": 0, "maximum": 1},
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "violations": {"type": "integer", "minimum": 0},
        "max_abs_error": {"type": "number", "minimum": 0},
        "mean_abs_error": {"type": "number", "minimum": 0},
        "error_normalizer": {"enum": ["L2", "W"]},
        "failure_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "target_failure_rate": {"type": "number", "minimum": 0},
        "live_instances": _QUANTILES,
        "per_trial": {"type": "array", "items": {"type": "object", "required": ["seed", "recall"]}},
        "timing": _TIMING,
    },
    "additionalProperties": False,
}

ORACLE_SCHEMA = {
    "type": "object",
    "required": ["kind", "mode", "config", "m", "oracle"],
    "properties": {
        "kind": {"const": "oracle"},
        "mode": {"const": "oracle"},
        "config": _CONFIG,
        "m": {"type": "integer", "minimum": 1},
        "oracle": {"type": "object", "required": ["l1", "l2"]},
    },
    "additionalProperties": False,
}

SCHEMAS = {"report": REPORT_SCHEMA, "continual": CONTINUAL_LINE_SCHEMA,
           "metrics": METRICS_SCHEMA, "oracle": ORACLE_SCHEMA}


def validate_document(doc: dict, kind: str) -> None:
    """Raise jsonschema.ValidationError when `doc` does not match the named schema."""
    jsonschema.validate(doc, SCHEMAS[kind])


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, seed=seed)
