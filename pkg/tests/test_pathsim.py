import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytraffic import streams
from heavytraffic.coeffs import CoefficientModel, fractional_coeffs
from heavytraffic.exceptions import DomainError, RegimeError
from heavytraffic.innovations import TwoSidedPareto
from heavytraffic.pathsim import (
    CoefficientFilter,
    PathConfig,
    divergence_probe,
    drifted_sup,
    filter_path,
    iter_indexed,
    iter_prelimit,
    mc_prelimit,
)
from heavytraffic.scaling import ScalingContext
from heavytraffic.stats import quantiles


def ctx(gamma=0.9, alpha=1.5, p=1.0):
    return ScalingContext(CoefficientModel.fractional(gamma), TwoSidedPareto(alpha, p))


def rng(i=0):
    return streams.stream(77, streams.MISC, i)


class TestFilter:
    def test_identity(self):
        x = rng().standard_normal(50)
        g = np.zeros(50)
        g[0] = 1.0
        np.testing.assert_array_equal(filter_path(g, x), x)

    def test_random_walk(self):
        np.testing.assert_allclose(filter_path(np.ones(3), np.ones(3)), [1, 2, 3])

    def test_definition_by_loop(self):
        g = fractional_coeffs(0.6, 40)
        x = rng(1).standard_normal(40)
        s = [sum(g[i] * x[n - 1 - i] for i in range(n)) for n in range(1, 41)]
        np.testing.assert_allclose(filter_path(g, x), s, rtol=1e-12, atol=1e-12)

    def test_fft_matches_direct(self):
        n = 2048
        g = fractional_coeffs(0.7, n)
        x = TwoSidedPareto(1.5, 1.0).sample(rng(2), n)
        direct = filter_path(g, x, fft_threshold=n + 1)
        fast = filter_path(g, x, fft_threshold=1)
        assert np.max(np.abs(fast - direct)) <= 1e-8 * np.max(np.abs(direct))

    def test_overlap_add_matches_single_fft(self):
        n = 10_000
        g = fractional_coeffs(0.8, n)
        x = rng(3).standard_normal(n)
        whole = filter_path(g, x, fft_threshold=1)
        blocks = filter_path(g, x, fft_threshold=1, block_size=1500)
        np.testing.assert_allclose(blocks, whole, rtol=0, atol=1e-9 * np.max(np.abs(whole)))

    def test_cached_filter(self):
        g = fractional_coeffs(0.5, 5000)
        f = CoefficientFilter(g)
        x = rng(4).standard_normal(5000)
        np.testing.assert_allclose(f.apply(x), np.convolve(g, x)[:5000], atol=1e-9)
        with pytest.raises(DomainError):
            f.apply(x[:10])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            filter_path(np.ones(3), np.ones(4))
        with pytest.raises(DomainError):
            filter_path(np.ones(0), np.ones(0))

    @given(st.integers(1, 4096), st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, n, seed):
        r = np.random.default_rng(seed)
        g = fractional_coeffs(0.7, n)
        x, y = r.standard_normal(n), r.standard_normal(n)
        lhs = filter_path(g, x + y)
        rhs = filter_path(g, x) + filter_path(g, y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))

    @given(st.integers(1, 6000), st.floats(-1e3, 1e3).filter(lambda s: abs(s) > 1e-3))
    @settings(max_examples=25, deadline=None)
    def test_scaling_equivariance(self, n, s):
        g = fractional_coeffs(0.7, n)
        x = rng(5).standard_normal(n)
        base = filter_path(g, x)
        np.testing.assert_allclose(filter_path(g, s * x), s * base, rtol=1e-12,
                                   atol=1e-12 * abs(s) * np.max(np.abs(base)))


class TestDriftedSup:
    def test_zero_path(self):
        assert drifted_sup(np.zeros(5), np.arange(1, 6.0), 0.5) == (0.0, 0)

    def test_random_walk_hand(self):
        assert drifted_sup([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.5) == (0.0, 0)

    def test_hand_example(self):
        v, j = drifted_sup([5.0, 2.0, 3.0], [1.0, 1.5, 1.875], 1.0)
        assert (v, j) == (4.0, 1)

    def test_empty_and_mismatch(self):
        assert drifted_sup([], [], 1.0) == (0.0, 0)
        with pytest.raises(DomainError):
            drifted_sup([1.0], [1.0, 2.0], 1.0)

    @given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_nonincreasing_in_drift(self, a1, a2):
        g = fractional_coeffs(0.8, 300)
        s = filter_path(g, TwoSidedPareto(1.5, 1.0).sample(rng(6), 300))
        ps = np.cumsum(g)
        lo, hi = sorted((a1, a2))
        assert drifted_sup(s, ps, hi)[0] <= drifted_sup(s, ps, lo)[0]


def test_iter_indexed_order():
    assert list(iter_indexed(lambda r: r * r, 10, threads=3)) == [r * r for r in range(10)]
    assert list(iter_indexed(lambda r: r, 3, start=5)) == [5, 6, 7]


class TestMonteCarlo:
    def test_reproducible_single_replicate(self):
        cfg = PathConfig(a=0.25, replicates=1, seed=11)
        a = mc_prelimit(ctx(), cfg)
        b = mc_prelimit(ctx(), cfg)
        assert a.values.tobytes() == b.values.tobytes()

    def test_independent_of_threads(self):
        c = ctx()
        one = mc_prelimit(c, PathConfig(a=0.25, replicates=12, seed=4, threads=1))
        three = mc_prelimit(c, PathConfig(a=0.25, replicates=12, seed=4, threads=3))
        assert one.values.tobytes() == three.values.tobytes()
        np.testing.assert_array_equal(one.aux, three.aux)

    def test_prefix_of_replicates(self):
        c = ctx()
        few = mc_prelimit(c, PathConfig(a=0.25, replicates=3, seed=4))
        many = mc_prelimit(c, PathConfig(a=0.25, replicates=8, seed=4))
        np.testing.assert_array_equal(few.values, many.values[:3])

    def test_nonnegative_and_scaled(self):
        c = ctx()
        s = mc_prelimit(c, PathConfig(a=0.25, replicates=40, seed=2))
        assert np.all(s.values >= 0)
        raw = np.array([v for _, v, _ in iter_prelimit(c, PathConfig(a=0.25, replicates=40, seed=2))])
        np.testing.assert_allclose(s.values * s.meta["scale"], raw, rtol=1e-14)
        assert s.meta["horizon"] == c.horizon(0.25, 8)

    def test_divergent_refused(self):
        with pytest.raises(RegimeError, match="infinite in probability"):
            mc_prelimit(ctx(gamma=0.5, alpha=1.3), PathConfig(a=0.1))

    def test_divergent_explicit_horizon_streams(self):
        out = list(iter_prelimit(ctx(gamma=0.5, alpha=1.3), PathConfig(a=0.1, horizon=500, replicates=3)))
        assert [r for r, _, _ in out] == [0, 1, 2]

    def test_config_errors(self):
        for kw in ({"a": 0.0}, {"a": 1.0, "replicates": 0}, {"a": 1.0, "horizon": 0},
                   {"a": 1.0, "horizon_multiplier": -1.0}):
            with pytest.raises(DomainError):
                PathConfig(**kw)


@functools.lru_cache(maxsize=None)
def _run(a, horizon_multiplier, replicates, seed):
    return mc_prelimit(ctx(), PathConfig(a=a, horizon_multiplier=horizon_multiplier,
                                         replicates=replicates, seed=seed))


def test_median_stable_across_seeds():
    # two disjoint seeds: the bootstrap intervals of the medians overlap
    (m1,) = quantiles(_run(0.25, 8.0, 400, 101), [0.5], seed=1)
    (m2,) = quantiles(_run(0.25, 8.0, 400, 202), [0.5], seed=2)
    assert m1.lo <= m2.hi and m2.lo <= m1.hi


@pytest.mark.slow
def test_horizon_sensitivity():
    # doubling T_h from 8 to 16 should move the 90th percentile by less than
    # the bootstrap interval width of the T_h = 8 estimate
    (q8,) = quantiles(_run(0.25, 8.0, 1000, 101), [0.9], seed=1)
    (q16,) = quantiles(_run(0.25, 16.0, 1000, 101), [0.9], seed=1)
    shift, width = abs(q16.value - q8.value), q8.hi - q8.lo
    assert shift < width, f"T_h=8: {q8}; T_h=16: {q16}; shift {shift:.3g} vs width {width:.3g}"


class TestDivergenceProbe:
    def test_divergent_growth(self):
        res = divergence_probe(ctx(gamma=0.5, alpha=1.3), 0.1, [10**3, 10**4, 10**5], 60, seed=5)
        assert res.strictly_increasing()
        assert res.samples.shape == (60, 3)

    def test_deterministic(self):
        c = ctx(gamma=0.5, alpha=1.3)
        a = divergence_probe(c, 0.1, [100, 1000], 10, seed=9)
        b = divergence_probe(c, 0.1, [100, 1000], 10, seed=9, threads=2)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_nested_running_max(self):
        res = divergence_probe(ctx(gamma=0.5, alpha=1.3), 0.1, [10, 100, 1000], 20, seed=3)
        assert np.all(np.diff(res.samples, axis=1) >= 0)

    def test_heavy_traffic_plateau(self):
        # contrast: growth far slower than in the divergent case
        res = divergence_probe(ctx(), 0.5, [10**3, 10**4, 10**5], 60, seed=5)
        assert res.medians[-1] / res.medians[1] < 2.0

    def test_bad_input(self):
        with pytest.raises(DomainError):
            divergence_probe(ctx(), 0.0, [10], 1, seed=0)
        with pytest.raises(DomainError):
            divergence_probe(ctx(), 0.1, [], 1, seed=0)
