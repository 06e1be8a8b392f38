import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpslide.mechanisms import (
    LaplaceSampler, SmoothBoundParams, advanced_composition, basic_composition, clamp_freq,
    clamp_l2, freq_smooth_bound, freq_smoothness, l2_smooth_bound, l2_smoothness,
    laplace_sample, mg_release_sensitivity, smooth_laplace_scale,
)
from dpslide.sketches import MisraGriesSummary


class TestLaplace:
    def test_tail_at_two_scales(self):
        draws = LaplaceSampler(1).sample(3.0, 1_000_000)
        assert abs(np.mean(np.abs(draws) >= 6.0) - math.exp(-2)) <= 0.002

    def test_median_near_zero(self):
        b = 2.0
        draws = LaplaceSampler(2).sample(b, 1_000_000)
        assert abs(np.median(draws)) <= 3 * b * 1e-3

    def test_reproducible(self):
        a = LaplaceSampler(7).sample(1.0, 10)
        b = LaplaceSampler(7).sample(1.0, 10)
        assert np.array_equal(a, b)
        s, t = LaplaceSampler(7), LaplaceSampler(7)
        assert [laplace_sample(s, 1.0) for _ in range(5)] == [laplace_sample(t, 1.0) for _ in range(5)]

    @pytest.mark.parametrize("scale", [0.0, -1.0, float("nan")])
    def test_rejects_bad_scale(self, scale):
        with pytest.raises(ValueError):
            LaplaceSampler(0).sample(scale)

    def test_scalar_and_finite(self):
        s = LaplaceSampler(3)
        x = s.sample(1.0)
        assert isinstance(x, float)
        assert np.all(np.isfinite(s.sample(1.0, 100_000)))


P10 = SmoothBoundParams(epsilon=1.0, alpha=0.5, m=2**10)


class TestSmoothBounds:
    def test_l2_bound_examples(self):
        assert l2_smooth_bound(0, P10) == 2
        assert l2_smooth_bound(2000, P10) == pytest.approx(3.0)

    def test_freq_bound_examples(self):
        p = SmoothBoundParams(epsilon=8.0, alpha=0.5, m=2**10)
        assert freq_smooth_bound(0, p) == 2
        assert freq_smooth_bound(1600, p) == pytest.approx(2.8)

    def test_kappa_scales_constant(self):
        p = SmoothBoundParams(epsilon=1.0, alpha=0.5, m=2**10, kappa=10)
        assert l2_smooth_bound(2000, p) == pytest.approx(12.0)

    def test_rejects_negative_inputs(self):
        with pytest.raises(ValueError):
            l2_smooth_bound(-1, P10)
        with pytest.raises(ValueError):
            freq_smooth_bound(-1, P10)
        with pytest.raises(ValueError):
            SmoothBoundParams(epsilon=0, alpha=0.5, m=4)

    @pytest.mark.parametrize("eps,m", [(0.5, 2**8), (1.0, 2**10), (4.0, 2**16)])
    def test_l2_bound_is_smooth_on_neighbor_grid(self, eps, m):
        p = SmoothBoundParams(epsilon=eps, alpha=0.5, m=m)
        beta = l2_smoothness(p)
        for g in np.linspace(0, 1e6, 2001):
            step = 2 + eps / (250 * p.log_m) * g
            for g2 in (max(0.0, g - step), g + step):
                assert l2_smooth_bound(g2, p) <= math.exp(beta) * l2_smooth_bound(g, p) * (1 + 1e-12)

    @pytest.mark.parametrize("alpha,eps", [(0.2, 1.0), (0.5, 8.0)])
    def test_freq_bound_is_smooth_on_neighbor_grid(self, alpha, eps):
        p = SmoothBoundParams(epsilon=eps, alpha=alpha, m=2**12)
        beta = freq_smoothness(p)
        for h in np.linspace(0, 1e6, 2001):
            step = 2 + alpha**3 * eps / (250 * p.log_m) * h
            for h2 in (max(0.0, h - step), h + step):
                assert freq_smooth_bound(h2, p) <= math.exp(beta) * freq_smooth_bound(h, p) * (1 + 1e-12)

    def test_epsilon_floor(self):
        p = SmoothBoundParams(epsilon=1.0, alpha=0.5, m=2**10, window=10_000)
        assert p.epsilon_floor() == pytest.approx(1000 * 10 / (0.125 * 100))
        assert not p.epsilon_ok()


class TestClamps:
    @given(st.floats(0, 1e6), st.floats(1, 1e6))
    def test_clamp_l2_idempotent_and_in_band(self, est, true):
        r = P10.epsilon / (500 * P10.log_m)
        g = clamp_l2(est, true, P10)
        assert clamp_l2(g, true, P10) == g
        assert (1 - r) * true <= g * (1 + 1e-12) and g <= (1 + r) * true * (1 + 1e-12)

    @given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1, 1e6))
    def test_clamp_l2_order_preserving(self, a, b, true):
        lo, hi = sorted((a, b))
        assert clamp_l2(lo, true, P10) <= clamp_l2(hi, true, P10)

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1, 1e6))
    def test_clamp_freq_idempotent_and_monotone(self, a, b, f, l2):
        h = clamp_freq(a, f, l2, P10)
        assert clamp_freq(h, f, l2, P10) == h
        lo, hi = sorted((a, b))
        assert clamp_freq(lo, f, l2, P10) <= clamp_freq(hi, f, l2, P10)


class TestSensitivityAndScale:
    def test_mg_release_sensitivity_formula(self):
        assert mg_release_sensitivity(0.1, 0) == 0
        assert mg_release_sensitivity(0.1, 100) == pytest.approx(10)
        with pytest.raises(ValueError):
            mg_release_sensitivity(0.1, -1)

    @staticmethod
    def _mg_neighbor_l1(alpha, x, y):
        a, b = MisraGriesSummary(alpha), MisraGriesSummary(alpha)
        for u, v in zip(x, y):
            a.update(u)
            b.update(v)
        sa, sb = a.snapshot(), b.snapshot()
        return sum(abs(sa.get(k, 0) - sb.get(k, 0)) for k in set(sa) | set(sb))

    def _neighbors(self, rng, length, count, universe):
        for _ in range(count):
            x = rng.integers(1, universe, length)
            x[rng.random(length) < 0.3] = 1
            y = x.copy()
            y[rng.integers(length)] = rng.integers(1, universe)
            yield x.tolist(), y.tolist()

    def test_mg_neighbor_blocks(self):
        # blocks of at least (k + 1) / alpha updates, where alpha * length >= k + 1
        rng = np.random.default_rng(0)
        alpha, length = 0.1, 200
        for x, y in self._neighbors(rng, length, 200, 30):
            assert self._mg_neighbor_l1(alpha, x, y) <= mg_release_sensitivity(alpha, length)

    def test_mg_short_blocks_exceed_alpha_length(self):
        # one substitution can move k + 1 units of mass, more than alpha * length
        # once the block is shorter than (k + 1) / alpha
        rng = np.random.default_rng(0)
        alpha, length = 0.1, 100
        worst = max(self._mg_neighbor_l1(alpha, x, y)
                    for x, y in self._neighbors(rng, length, 2000, 22))
        assert worst == MisraGriesSummary(alpha).capacity + 1
        assert worst > mg_release_sensitivity(alpha, length)

    def test_smooth_laplace_scale(self):
        assert smooth_laplace_scale(1, 2) == 1
        assert smooth_laplace_scale(2, 0.5) == 8
        with pytest.raises(ValueError):
            smooth_laplace_scale(0, 1)

    def test_basic_composition_adds_up(self):
        k, eps = 7, 1.4
        assert basic_composition([eps / k] * k)[0] == pytest.approx(eps)
        assert basic_composition([0.1, 0.2], [1e-6, 1e-6]) == pytest.approx((0.3, 2e-6))

    def test_advanced_composition(self):
        eps, dlt = advanced_composition(100, 0.01, 1e-6, 1e-5)
        expect = 0.01 * math.sqrt(200 * math.log(1e5)) + 100 * 0.01 * math.tanh(0.005)
        assert eps == pytest.approx(expect)
        assert dlt == pytest.approx(100 * 1e-6 + 1e-5)
        # beats basic composition for many small steps
        assert eps < 100 * 0.01
        with pytest.raises(ValueError):
            advanced_composition(0, 0.1, 0, 0.5)
