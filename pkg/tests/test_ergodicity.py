import numpy as np
import pytest

from vatom.ergodicity import (
    autocorrelation_delay,
    coarse_grain,
    delay_embedding,
    exponential_tail_fit,
    first_return_distribution,
    fnn_embedding_dimension,
    kth_return_distribution,
    mean_period,
    mean_recurrence_vs_measure,
    most_visited_interior_cell,
    poisson_return_consistency,
    return_map,
    rosenstein_mle,
    top_bin_mass,
)
from vatom.errors import InsufficientDataError, InvalidInputError
from vatom.observables import ObservableSeries
from vatom.synthetic import iid_uniform_series, logistic_series, sinusoid_series


def make_series(values, dt=1.0):
    return ObservableSeries(np.asarray(values, dtype=float), dt=dt, label="test")


class TestCoarseGrain:
    def test_alternating(self):
        s = make_series([0.0, 1.0] * 50)
        cells = coarse_grain(s, 2)
        np.testing.assert_allclose(cells.measures, [0.5, 0.5])
        assert cells.indices.min() == 0 and cells.indices.max() == 1

    def test_uniform_measures(self):
        s = iid_uniform_series(200_000, seed=1)
        cells = coarse_grain(s, 10)
        np.testing.assert_allclose(cells.measures, 0.1, atol=5e-3)

    def test_measures_sum_to_one(self):
        s = iid_uniform_series(999, seed=2)
        for n in (2, 7, 31):
            cells = coarse_grain(s, n)
            assert cells.measures.sum() == pytest.approx(1.0, abs=1e-12)
            # the underlying count partition is exact
            assert np.bincount(cells.indices, minlength=n).sum() == len(s)

    def test_constant_series_degenerate(self):
        cells = coarse_grain(make_series([3.0] * 10), 5)
        assert cells.degenerate
        assert cells.n_cells == 1

    def test_too_few_cells(self):
        with pytest.raises(InvalidInputError):
            coarse_grain(make_series([1.0, 2.0]), 1)


class TestFirstReturn:
    def test_period_two(self):
        s = make_series([0.0, 1.0] * 200)
        cells = coarse_grain(s, 2)
        for target in (0, 1):
            stats = first_return_distribution(cells, target)
            assert stats.return_times.tolist() == [2]
            assert stats.mean_return == 2.0

    def test_iid_shifted_geometric(self):
        # exit-required convention: one step out, then geometric re-entry;
        # closed form for measure p is P(tau = k) = p (1-p)^{k-2}, k >= 2
        s = iid_uniform_series(400_000, seed=4)
        cells = coarse_grain(s, 10)
        p = cells.measures[5]
        stats = first_return_distribution(cells, 5)
        assert stats.mean_return == pytest.approx(1.0 + 1.0 / p, rel=0.02)
        pmf = stats.pmf(10)
        expect = [0.0, 0.0] + [p * (1 - p) ** (k - 2) for k in range(2, 10)]
        np.testing.assert_allclose(pmf, expect, atol=3e-3)

    def test_histogram_mass_equals_samples(self):
        s = iid_uniform_series(5000, seed=6)
        cells = coarse_grain(s, 6)
        stats = first_return_distribution(cells, 2)
        assert stats.counts.sum() == stats.sample_count

    def test_insufficient_visits(self):
        s = make_series(np.linspace(0, 1, 50))
        cells = coarse_grain(s, 10)
        with pytest.raises(InsufficientDataError):
            first_return_distribution(cells, 0)  # visited once, never again


class TestKthReturn:
    def test_period_two_k3(self):
        s = make_series([0.0, 1.0] * 300)
        cells = coarse_grain(s, 2)
        stats = kth_return_distribution(cells, 0, 3)
        assert stats.return_times.tolist() == [6]

    def test_iid_negative_binomial(self):
        s = iid_uniform_series(400_000, seed=8)
        cells = coarse_grain(s, 8)
        p = cells.measures[3]
        k = 3
        stats = kth_return_distribution(cells, 3, k)
        # sum of k shifted geometrics: mean k (1 + 1/p)
        assert stats.mean_return == pytest.approx(k * (1 + 1 / p), rel=0.03)

    def test_k1_equals_first_return(self):
        s = iid_uniform_series(20_000, seed=10)
        cells = coarse_grain(s, 5)
        a = first_return_distribution(cells, 2)
        b = kth_return_distribution(cells, 2, 1)
        np.testing.assert_array_equal(a.return_times, b.return_times)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_bad_k(self):
        s = iid_uniform_series(1000, seed=1)
        with pytest.raises(InvalidInputError):
            kth_return_distribution(coarse_grain(s, 4), 1, 0)


class TestKac:
    def test_iid_slope_one(self):
        s = iid_uniform_series(300_000, seed=12)
        fit = mean_recurrence_vs_measure(s, [6, 8, 10, 12, 16, 20])
        assert abs(fit.slope - 1.0) < 0.1
        assert fit.r_squared > 0.99

    def test_period_two_point(self):
        s = make_series([0.0, 1.0] * 4000)
        cells = coarse_grain(s, 2)
        stats = first_return_distribution(cells, 0)
        assert (1.0 / cells.measures[0], stats.mean_return) == (2.0, 2.0)

    def test_needs_four_partitions(self):
        s = iid_uniform_series(1000, seed=3)
        with pytest.raises(InvalidInputError):
            mean_recurrence_vs_measure(s, [4, 8, 16])


class TestPoissonConsistency:
    def test_iid_consistent(self):
        s = iid_uniform_series(400_000, seed=14)
        cells = coarse_grain(s, 10)
        tgt = most_visited_interior_cell(cells)
        for k in (2, 3, 4):
            _, _, p = poisson_return_consistency(cells, tgt, k)
            assert p > 0.01

    def test_periodic_inconsistent(self):
        # deterministic alternation is maximally correlated
        s = make_series(np.sin(2 * np.pi * np.arange(40_000) / 16.0))
        cells = coarse_grain(s, 6)
        stat, dof, p = poisson_return_consistency(cells, 2, 2)
        assert p < 1e-6


class TestShapeSummaries:
    def test_spiky_top_mass(self):
        s = make_series([0.0, 1.0] * 500)
        stats = first_return_distribution(coarse_grain(s, 2), 0)
        assert top_bin_mass(stats) == 1.0

    def test_exponential_fit_on_geometric(self):
        s = iid_uniform_series(400_000, seed=16)
        cells = coarse_grain(s, 12)
        stats = first_return_distribution(cells, 5)
        rate, r2 = exponential_tail_fit(stats)
        # geometric decay rate: -ln(1 - p)
        p = cells.measures[5]
        assert r2 > 0.95
        assert rate == pytest.approx(-np.log1p(-p), rel=0.15)


class TestReturnMap:
    def test_pairs(self):
        s = make_series([1.0, 2.0, 3.0, 4.0])
        pairs = return_map(s, 1)
        np.testing.assert_array_equal(pairs, [[1, 2], [2, 3], [3, 4]])
        assert pairs.shape[0] == len(s) - 1

    def test_cosine_ellipse(self):
        t = np.arange(5000)
        s = make_series(np.cos(0.1 * t))
        pairs = return_map(s, 1)
        # (x, y) on an ellipse: y = x cos w - sin w sqrt(1 - x^2) branch mix;
        # verify the quadratic invariant x^2 + y^2 - 2xy cos w = sin^2 w
        w = 0.1
        inv = (pairs[:, 0] ** 2 + pairs[:, 1] ** 2
               - 2 * np.cos(w) * pairs[:, 0] * pairs[:, 1])
        np.testing.assert_allclose(inv, np.sin(w) ** 2, atol=1e-10)

    def test_constant(self):
        pairs = return_map(make_series([2.0] * 10), 1)
        assert np.all(pairs == 2.0)


class TestEmbeddingHelpers:
    def test_delay_embedding_layout(self):
        x = np.arange(10.0)
        emb = delay_embedding(x, 3, 2)
        np.testing.assert_array_equal(emb[0], [0, 2, 4])
        np.testing.assert_array_equal(emb[-1], [5, 7, 9])

    def test_autocorrelation_delay_sinusoid(self):
        s = sinusoid_series(4000, period=40.0)
        lag = autocorrelation_delay(s)
        assert 8 <= lag <= 12  # quarter period is 10

    def test_mean_period(self):
        s = sinusoid_series(8000, period=50.0)
        assert abs(mean_period(s) - 50) <= 1


class TestFnn:
    def test_clean_sinusoid_embeds_in_plane(self):
        s = sinusoid_series(4000, period=36.97718)
        rep = fnn_embedding_dimension(s, delay=9, d_max=5)
        assert rep.d_min == 2
        assert not rep.saturated

    def test_noisy_sinusoid(self):
        rms = 1 / np.sqrt(2)
        s = sinusoid_series(4000, period=36.97718, noise=rms / 100, seed=5)
        rep = fnn_embedding_dimension(s, delay=9, d_max=6, noise_scale=2 * rms / 100)
        assert rep.d_min == 2

    def test_white_noise_saturates(self):
        s = iid_uniform_series(20_000, seed=3)
        rep = fnn_embedding_dimension(s, delay=1, d_max=6)
        assert rep.saturated
        assert rep.d_min is None
        assert np.all(rep.fnn_fraction > 0.05)

    def test_fraction_monotone_after_dmin(self):
        # deterministic low-dimensional signal: fractions fall monotonically
        s = sinusoid_series(6000, period=41.3)
        rep = fnn_embedding_dimension(s, delay=10, d_max=4)
        diffs = np.diff(rep.fnn_fraction)
        assert np.all(diffs <= 1e-4)

    def test_short_series_rejected(self):
        s = make_series(np.sin(np.arange(30)))
        with pytest.raises(InsufficientDataError):
            fnn_embedding_dimension(s, delay=5, d_max=8)


class TestRosenstein:
    def test_logistic_map(self):
        s = logistic_series(100_000)
        rep = rosenstein_mle(s, dim=1, delay=1, theiler=10, k_max=30,
                             max_refs=20_000)
        # direct oracle: average of ln |f'(x)| along the orbit
        oracle = float(np.mean(np.log(np.abs(4.0 - 8.0 * s.values[:-1]))))
        assert oracle == pytest.approx(np.log(2), abs=1e-3)
        assert rep.slope == pytest.approx(np.log(2), abs=0.05)

    def test_sinusoid_zero_exponent(self):
        s = sinusoid_series(20_000, period=36.97718)
        rep = rosenstein_mle(s, dim=2, delay=9, theiler=37, k_max=200,
                             max_refs=4_000)
        assert abs(rep.slope) < 0.005

    def test_slope_invariant_under_rescaling(self):
        s = logistic_series(50_000)
        rep1 = rosenstein_mle(s, dim=1, delay=1, theiler=10, k_max=30,
                              max_refs=10_000)
        rep2 = rosenstein_mle(s.rescaled(37.5), dim=1, delay=1, theiler=10,
                              k_max=30, max_refs=10_000)
        assert rep2.slope == pytest.approx(rep1.slope, rel=0.05)

    def test_per_time_scaling(self):
        s = logistic_series(30_000, dt=0.5)
        rep = rosenstein_mle(s, dim=1, delay=1, theiler=10, k_max=25,
                             max_refs=5_000)
        assert rep.slope_per_time == pytest.approx(rep.slope / 0.5)

    def test_explicit_fit_range(self):
        s = logistic_series(50_000)
        rep = rosenstein_mle(s, dim=1, delay=1, theiler=10, k_max=30,
                             max_refs=10_000, fit_range=(1, 10))
        assert rep.fit_range == (1, 10)
        assert rep.slope == pytest.approx(np.log(2), abs=0.08)

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            rosenstein_mle(make_series(np.sin(np.arange(50))), dim=2, delay=1,
                           theiler=5, k_max=100)
