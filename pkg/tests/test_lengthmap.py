import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relu_lab.initializers import RAI, BiasFreeSymmetric, He, sigma_w_from_moments
from relu_lab.lengthmap import (LayerQ, LengthStats, check_recursion, estimate_lengthmap, moment_bounds,
                                q_of, sample_q)
from relu_lab.net import ActivationTrace, Architecture, forward_trace


def const_arch(n, depth, d_in=1):
    return Architecture((d_in,) + (n,) * depth)


def synthetic(means, halfwidth, widths, trials=100):
    layers = tuple(LayerQ(l + 1, m, (m - halfwidth, m + halfwidth), trials) for l, m in enumerate(means))
    return LengthStats(layers, widths)


class TestQ:
    def test_examples(self):
        t = ActivationTrace(pre=(np.zeros(3), np.ones(4)), post=(np.zeros(3),), output=np.ones(4))
        assert q_of(t) == [0.0, 1.0]

    def test_matches_sum_of_squares(self):
        rng = np.random.default_rng(0)
        p = He(0.1).sample(Architecture((2, 5, 3, 4)), rng)
        t = forward_trace(p, rng.normal(size=2))
        want = [sum(v * v for v in z.tolist()) / len(z) for z in t.pre]
        np.testing.assert_allclose(q_of(t), want, rtol=1e-14)

    def test_sample_q_matches_per_net_traces(self):
        from relu_lab.rng import SeedStreams

        arch = const_arch(3, 6)
        q = sample_q(arch, RAI(), [0.7], trials=20, seed=4)
        for t in range(20):
            p = RAI().sample(arch, SeedStreams(4).stream(t))
            np.testing.assert_allclose(q[t], q_of(forward_trace(p, [0.7])), rtol=1e-12)


class TestEstimate:
    def test_zero_input_bias_free(self):
        stats = estimate_lengthmap(const_arch(4, 10), BiasFreeSymmetric(), x=[0.0], trials=200)
        assert not stats.mean_q.any()

    def test_rai_bounded(self):
        n = 4
        arch = const_arch(n, 50)
        stats = estimate_lengthmap(arch, RAI(), trials=2000)
        b = moment_bounds(n, 2 / 3, 0.5, RAI().sigma_w)
        assert np.all(np.isfinite(stats.mean_q)) and np.all(stats.mean_q >= 0)
        assert stats.mean_q[-1] <= 2 * b.fixed_point
        assert b.fixed_point == pytest.approx(b.sigma_b2 * (n + 1), rel=1e-12)

    def test_finite_through_100_layers(self):
        stats = estimate_lengthmap(const_arch(2, 100), RAI(), trials=500)
        assert np.all(np.isfinite(stats.mean_q))

    def test_he_stays_order_one(self):
        # sanity check only: He roughly preserves q
        stats = estimate_lengthmap(const_arch(8, 30), He(), trials=2000)
        assert 0.1 < stats.mean_q[-1] / stats.mean_q[0] < 10


class TestMomentBounds:
    def test_scale_identity(self):
        s = sigma_w_from_moments(2 / 3, 0.5)
        for n in (1, 2, 4, 8, 100):
            assert abs(moment_bounds(n, 2 / 3, 0.5, s).A_upp - 2 * n / (n + 1)) <= 1e-12

    @settings(max_examples=200)
    @given(mu1=st.floats(1e-3, 1.0), mu2=st.floats(1e-3, 0.999), n=st.integers(1, 64))
    def test_identity_over_domain(self, mu1, mu2, n):
        b = moment_bounds(n, mu1, mu2, sigma_w_from_moments(mu1, mu2))
        assert b.A_upp == pytest.approx(2 * n / (n + 1), abs=1e-12)

    def test_sigma_b2_example(self):
        assert moment_bounds(4, 2 / 3, 0.5, 0.6007).sigma_b2 == pytest.approx(0.17217, abs=1e-5)

    def test_low_le_upp(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            mu2 = rng.uniform(0.01, 0.99)
            mu1 = rng.uniform(math.sqrt(mu2) * 0.5, 1.0)
            b = moment_bounds(int(rng.integers(1, 20)), mu1, mu2, rng.uniform(0.01, 2))
            assert 0 < b.A_low <= b.A_upp and b.sigma_b2 > 0

    def test_domain(self):
        with pytest.raises(ValueError):
            moment_bounds(0, 0.5, 0.5, 0.5)


class TestCheckRecursion:
    b = moment_bounds(4, 2 / 3, 0.5, 0.6007)
    widths = (1,) + (4,) * 6

    def midpoints(self, q1=1.0):
        means = [q1]
        for _ in range(5):
            lo, hi = self.b.predicted(means[-1], means[-1])
            means.append((lo + hi) / 2)
        return means

    def test_midpoints_pass(self):
        verdicts = check_recursion(synthetic(self.midpoints(), 1e-6, self.widths), self.b)
        assert [v.layer for v in verdicts] == [3, 4, 5, 6]
        assert all(v.passed for v in verdicts)

    def test_violation_fails(self):
        means = self.midpoints()
        means[4] *= 10
        verdicts = check_recursion(synthetic(means, 1e-3, self.widths), self.b)
        assert [v.passed for v in verdicts] == [True, True, False, False]

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            check_recursion(synthetic(self.midpoints(), 1e-3, (1,) + (3,) * 6), self.b)

    def test_rai_n4_passes(self):
        stats = estimate_lengthmap(const_arch(4, 20), RAI(), trials=10**4)
        verdicts = check_recursion(stats, moment_bounds(4, 2 / 3, 0.5, RAI().sigma_w))
        assert len(verdicts) == 18
        assert sum(v.passed for v in verdicts) >= 0.95 * len(verdicts)
