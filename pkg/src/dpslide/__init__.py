"""Differentially private heavy hitters over sliding windows."""

from .continual import ContinualConfig, ContinualHeavyHitters
from .harness import RunConfig, run_continual, run_experiment, run_oneshot, run_oracle
from .heavy_hitters import (
    HeavyHitterReport, L1HeavyHitters, L2HeavyHitters, PrivacyConfig, SlidingL2Norm,
)
from .mechanisms import LaplaceSampler, SmoothBoundParams
from .sketches import AmsSketch, CountSketchTable, MisraGriesSummary
from .streams import GeneratorSpec, StreamInputError, generate_stream, parse_stream
from .window import SmoothHistogram, WindowCounter

__all__ = [
    "AmsSketch", "ContinualConfig", "ContinualHeavyHitters", "CountSketchTable",
    "GeneratorSpec", "HeavyHitterReport", "L1HeavyHitters", "L2HeavyHitters",
    "LaplaceSampler", "MisraGriesSummary", "PrivacyConfig", "RunConfig",
    "SlidingL2Norm", "SmoothBoundParams", "SmoothHistogram", "StreamInputError",
    "WindowCounter", "generate_stream", "parse_stream", "run_continual",
    "run_experiment", "run_oneshot", "run_oracle",
]
