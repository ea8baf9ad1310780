import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relu_lab.bdp import (Grid1D, RandomBall, bounds_table, estimate_bdp, first_dead_layers,
                          is_born_dead, is_constant_on, lower_bound_d1, max_depth, plow_markov_oracle,
                          quadrant_prob, quadrant_prob_estimate, safe_width, transition_matrix,
                          upper_bound_sym)
from relu_lab.initializers import RAI, BiasFreeSymmetric, He, SymmetricUniform
from relu_lab.net import Architecture, Dataset, Params
from relu_lab.rng import SeedStreams


def exact_upper(widths):
    return 1 - math.prod(1 - Fraction(1, 2**n) for n in widths)


def exact_lower(L, N):
    half = Fraction(1, 2)
    a1 = 1 - half**N
    a2 = 1 - half ** (N - 1) - (N - 1) * half ** (2 * N)
    c = (1 - 2 * half**N) * (1 - half**N) / (1 + (N - 1) * half**N)
    return 1 - a1 ** (L - 2) + c * (a2 ** (L - 2) - a1 ** (L - 2))


ABS_NET = Params(([[1.0], [-1.0]], [[1.0, 1.0]]), ([0.0, 0.0], [0.0]))


class TestDataSpecs:
    def test_grid(self):
        d = Grid1D(101, 2.0).materialize()
        assert d.inputs.shape == (101, 1)
        assert d.inputs.min() == -2.0 and d.inputs.max() == 2.0

    @pytest.mark.parametrize("d_in", [1, 2, 5])
    def test_ball(self, d_in):
        d = RandomBall(200, 1.5, d_in, seed=3).materialize()
        assert np.all(np.linalg.norm(d.inputs, axis=1) <= 1.5)
        if d_in == 1:
            assert d.inputs.max() > 0 > d.inputs.min()

    def test_ball_deterministic(self):
        assert np.array_equal(RandomBall(10, seed=1).materialize().inputs, RandomBall(10, seed=1).materialize().inputs)


class TestDetection:
    def test_forced_dead_first_layer(self):
        p = Params(([[-1.0, -1.0], [-2.0, -0.5]], [[1.0, 1.0]]), ([-0.1, -0.3], [0.0]))
        data = Dataset(np.random.default_rng(0).random((20, 2)))
        assert is_born_dead(p, data) == (True, 1)
        assert is_constant_on(p, data)

    def test_abs_net_alive(self):
        assert is_born_dead(ABS_NET, Grid1D()) == (False, None)

    def test_constant_on(self):
        zero = Params.zeros(Architecture((1, 3, 1)))
        assert is_constant_on(zero, Grid1D())
        assert not is_constant_on(ABS_NET, Dataset([[-1.0], [0.5]]))
        with pytest.raises(ValueError):
            is_constant_on(ABS_NET, Dataset([[0.5]]))

    def test_smallest_layer_reported(self):
        arch = Architecture((1, 2, 2, 2, 1))
        w, b = He().draw(arch, np.random.default_rng(0))
        w[2], b[2] = -np.ones((2, 2)), -np.ones(2)
        w[1], b[1] = -np.ones((2, 2)), -np.ones(2)
        assert is_born_dead(Params(tuple(w), tuple(b)), Grid1D()).layer == 2

    def test_equivalence_over_random_nets(self):
        # a.s. equivalence of the layer-zero test and output constancy
        rng = np.random.default_rng(2024)
        data = Grid1D(21).materialize()
        schemes = [BiasFreeSymmetric(), He(), SymmetricUniform(), RAI()]
        dead_seen = disagreements = 0
        for i in range(10**4):
            depth, width = int(rng.integers(2, 8)), int(rng.integers(1, 4))
            p = schemes[i % 4].sample(Architecture.constant(1, width, depth), rng)
            dead = is_born_dead(p, data).dead
            dead_seen += dead
            disagreements += dead != is_constant_on(p, data)
        assert disagreements == 0
        assert dead_seen > 1000

    def test_stacked_detector_matches_reference(self):
        arch = Architecture.constant(2, 2, 6)
        data = RandomBall(50, d_in=2).materialize()
        streams = SeedStreams(1)
        nets = [He().sample(arch, streams.stream(t)) for t in range(500)]
        w = [np.stack([p.weights[l] for p in nets]) for l in range(arch.depth)]
        b = [np.stack([p.biases[l] for p in nets]) for l in range(arch.depth)]
        got = first_dead_layers(w, b, data.inputs)
        want = [is_born_dead(p, data).layer or 0 for p in nets]
        assert got.tolist() == want
        per_net = np.broadcast_to(data.inputs, (500,) + data.inputs.shape)
        assert first_dead_layers(w, b, per_net).tolist() == want


class TestEstimate:
    def test_no_hidden_layer(self):
        assert estimate_bdp(Architecture((1, 1)), He(), trials=100).dead == 0

    def test_sandwich_at_L10_N2(self):
        est = estimate_bdp(Architecture.constant(1, 2, 10), BiasFreeSymmetric(), trials=10**4, seed=0)
        lo, hi = lower_bound_d1(10, 2), upper_bound_sym([2] * 9)
        assert lo - 3 * est.se <= est.p_hat <= hi + 3 * est.se
        assert 0 <= est.ci95[0] <= est.p_hat <= est.ci95[1] <= 1

    def test_rai_L10_N2(self):
        est = estimate_bdp(Architecture.constant(1, 2, 10), RAI(), trials=10**4, seed=0)
        assert est.p_hat == pytest.approx(0.22, abs=0.05)

    def test_jobs_do_not_change_count(self):
        arch = Architecture.constant(1, 2, 8)
        one = estimate_bdp(arch, He(), trials=3500, seed=5, jobs=1)
        many = estimate_bdp(arch, He(), trials=3500, seed=5, jobs=3)
        assert one == many

    def test_trial_order_independent(self):
        # trial t only depends on its own stream
        arch = Architecture.constant(1, 2, 8)
        full = estimate_bdp(arch, He(), trials=2000, seed=9).dead
        x = Grid1D().materialize()
        per = sum(is_born_dead(He().sample(arch, SeedStreams(9).stream(t)), x).dead for t in range(2000))
        assert full == per

    def test_invalid(self):
        with pytest.raises(ValueError):
            estimate_bdp(Architecture((1, 2, 1)), He(), trials=0)
        with pytest.raises(ValueError):
            estimate_bdp(Architecture((2, 2, 1)), He(), data=Grid1D(), trials=10)


class TestBounds:
    def test_upper_examples(self):
        assert upper_bound_sym([]) == 0
        assert upper_bound_sym([2]) == 0.25
        assert upper_bound_sym([2] * 9) == pytest.approx(float(exact_upper([2] * 9)), abs=1e-15)
        assert upper_bound_sym([2] * 9) == pytest.approx(0.9249, abs=1e-4)
        assert upper_bound_sym([30] * 9) < 1e-7

    def test_lower_examples(self):
        assert lower_bound_d1(2, 5) == 0
        assert lower_bound_d1(10, 2) == pytest.approx(0.8703, abs=5e-5)
        assert lower_bound_d1(200, 2) == pytest.approx(1.0, abs=1e-6)
        with pytest.raises(ValueError):
            lower_bound_d1(1, 2)

    @pytest.mark.parametrize("N", range(1, 11))
    def test_closed_forms_match_exact_arithmetic(self, N):
        for L in (2, 3, 7, 20, 50):
            assert lower_bound_d1(L, N) == pytest.approx(float(exact_lower(L, N)), abs=1e-13)
            assert upper_bound_sym([N] * (L - 1)) == pytest.approx(float(exact_upper([N] * (L - 1))), abs=1e-13)

    def test_markov_oracle_matches(self):
        for N in range(1, 11):
            assert np.allclose(transition_matrix(N).sum(axis=1), 1.0, atol=1e-12)
            assert plow_markov_oracle(2, N) == 0
            for L in range(2, 51):
                assert abs(lower_bound_d1(L, N) - plow_markov_oracle(L, N)) <= 1e-12

    def test_sandwich_and_monotone(self):
        for N in range(1, 9):
            prev = 0.0
            for L in range(2, 41):
                lo, up = lower_bound_d1(L, N), upper_bound_sym([N] * (L - 1))
                assert -1e-15 <= lo <= up + 1e-15 <= 1 + 1e-15
                assert lo >= prev - 1e-15
                prev = lo

    def test_bounds_table(self):
        rows = bounds_table([2, 3], range(1, 6))
        assert len(rows) == 8
        assert all(r.p_lower <= r.p_markov + 1e-12 <= r.p_upper + 2e-12 for r in rows)


class TestDesignRules:
    def test_safe_width(self):
        assert safe_width(10, 0.01) == 10
        assert safe_width(10, 0.1) == 7
        assert upper_bound_sym([7] * 9) <= 0.1
        assert safe_width(1, 0.1) == 4 and safe_width(1, 0.9) == 1

    @settings(max_examples=200)
    @given(L=st.integers(1, 10**4), delta=st.floats(1e-6, 0.99))
    def test_safe_width_guarantee(self, L, delta):
        n = safe_width(L, delta)
        assert upper_bound_sym([n] * (L - 1)) <= delta

    def test_max_depth(self):
        assert max_depth(10, 0.01) == 10
        assert max_depth(10, 0.1) == 102
        for n in range(1, 30):
            assert max_depth(n + 1, 0.3) in (2 * max_depth(n, 0.3), 2 * max_depth(n, 0.3) + 1)

    def test_domain(self):
        with pytest.raises(ValueError):
            safe_width(0, 0.1)
        with pytest.raises(ValueError):
            max_depth(5, 1.0)


class TestQuadrant:
    rng = np.random.default_rng(0)

    def test_identical_vectors(self):
        assert quadrant_prob([1.0, 2.0], [1.0, 2.0], 10**4, self.rng) == 0

    def test_orthogonal_vectors(self):
        p = quadrant_prob([1.0, 0.0], [0.0, 1.0], 10**4, self.rng)
        assert abs(p - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / 10**4)

    def test_max_over_pairs(self):
        best = quadrant_prob_estimate(3, samples=10**4, rng=np.random.default_rng(1), pairs=1000)
        assert best <= 0.25 + 3 * math.sqrt(0.25 * 0.75 / 10**4)
