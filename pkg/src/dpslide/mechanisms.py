"""Laplace noise, smooth sensitivity bounds and privacy budget arithmetic.

Logarithms are base 2 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LaplaceSampler:
    """Seeded Laplace sampler using the inverse CDF of a uniform draw."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.Generator(np.random.Philox(seed))

    def _uniform(self, size):
        # open interval (-1/2, 1/2) so the log below stays finite
        u = self.rng.random(size)
        while True:
            bad = u == 0.0
            if not np.any(bad):
                return u - 0.5
            u = np.where(bad, self.rng.random(size), u)

    def sample(self, scale: float, size=None):
        if not scale > 0:
            raise ValueError(f"Laplace scale must be positive, got {scale!r}")
        u = self._uniform(size)
        draws = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
        if size is None:
            return float(draws)
        return draws


def laplace_sample(sampler: LaplaceSampler, scale: float) -> float:
    return sampler.sample(scale)


@dataclass(frozen=True)
class SmoothBoundParams:
    epsilon: float
    alpha: float
    m: int
    kappa: float = 1.0
    window: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (0 < self.alpha < 1):
            raise ValueError("alpha must lie in (0, 1)")
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def log_m(self) -> float:
        return math.log2(self.m)

    def epsilon_floor(self, window: int | None = None) -> float:
        """Smallest epsilon for which the heavy-hitter guarantees are claimed."""
        w = window or self.window
        if w is None:
            raise ValueError("a window length is needed")
        return self.kappa * 1000 * self.log_m / (self.alpha**3 * math.sqrt(w))

    def epsilon_ok(self, window: int | None = None) -> bool:
        return self.epsilon > self.epsilon_floor(window)


def l2_smooth_bound(g_value: float, params: SmoothBoundParams) -> float:
    """Smooth upper bound on the local sensitivity of the clamped L2 estimate."""
    if g_value < 0:
        raise ValueError("g_value must be non-negative")
    return params.kappa * params.epsilon * g_value / (200 * params.log_m) + 2.0


def freq_smooth_bound(h_value: float, params: SmoothBoundParams) -> float:
    """Smooth upper bound on the local sensitivity of a clamped frequency estimate."""
    if h_value < 0:
        raise ValueError("h_value must be non-negative")
    a3 = params.alpha**3
    return params.kappa * a3 * params.epsilon * h_value / (200 * params.log_m) + 2.0


def l2_smoothness(params: SmoothBoundParams) -> float:
    """Per-neighbor log-ratio allowed between bounds of neighboring inputs."""
    return params.epsilon / (150 * params.log_m)


def freq_smoothness(params: SmoothBoundParams) -> float:
    return params.alpha**3 * params.epsilon / (150 * params.log_m)


def mg_release_sensitivity(alpha_mg: float, block_length: int) -> float:
    if block_length < 0:
        raise ValueError("block_length must be non-negative")
    return alpha_mg * block_length


def smooth_laplace_scale(s_value: float, epsilon: float) -> float:
    if s_value <= 0 or epsilon <= 0:
        raise ValueError("S and epsilon must be positive")
    return 2.0 * s_value / epsilon


def clamp_l2(estimate: float, true_l2: float, params: SmoothBoundParams) -> float:
    """g(f): the estimate clamped into the accuracy band around the true L2.

    The band width scales with kappa like the sketch accuracy does.
    Needs the true norm, so it only serves the test suite.
    """
    r = params.kappa * params.epsilon / (500 * params.log_m)
    return float(np.clip(estimate, (1 - r) * true_l2, (1 + r) * true_l2))


def clamp_freq(estimate: float, true_freq: float, true_l2: float,
               params: SmoothBoundParams) -> float:
    """h(f): a frequency estimate clamped to within kappa alpha^3 eps L2 / (1000 log m) of the truth."""
    r = params.kappa * params.alpha**3 * params.epsilon / (1000 * params.log_m) * true_l2
    return float(np.clip(estimate, true_freq - r, true_freq + r))


def basic_composition(epsilons, deltas=None) -> tuple[float, float]:
    """Sequential composition: budgets add up."""
    eps = float(sum(epsilons))
    dlt = float(sum(deltas)) if deltas is not None else 0.0
    return eps, dlt


def advanced_composition(k: int, epsilon: float, delta: float, delta_prime: float) -> tuple[float, float]:
    """k-fold adaptive composition of (epsilon, delta) mechanisms with slack delta_prime.

    The second term uses (e^eps - 1) / (e^eps + 1), which equals tanh(eps / 2).
    """
    if k < 1 or epsilon < 0 or delta < 0 or not (0 < delta_prime < 1):
        raise ValueError("invalid composition parameters")
    eps = (epsilon * math.sqrt(2 * k * math.log(1 / delta_prime))
           + k * epsilon * math.tanh(epsilon / 2))
    return eps, k * delta + delta_prime
