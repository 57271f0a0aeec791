import math

import numpy as np
import pytest

import vatom._evolution as _evolution
from vatom import (
    BipartiteEvolution,
    BipartiteParams,
    ReducedDensityMatrix,
    TripartiteEvolution,
    TripartiteParams,
    atom_reduced_density,
    auto_cutoff,
    coherent_coefficients,
    mandel_q,
    mean_photon_number,
    series,
    svne,
)
from vatom.errors import (
    InvalidInputError,
    PositivityError,
    ResourceLimitError,
    UndefinedObservableError,
)
from vatom.observables import SERIES_POINT_CEILING

PARAMS = BipartiteParams(chi=5.0, lambda1=1.0, lambda2=1.0)


def diag_rho(p):
    p = np.asarray(p, dtype=float)
    return ReducedDensityMatrix.from_matrix(np.diag(p).astype(complex),
                                            expected_trace=float(p.sum()))


class TestSvne:
    def test_pure(self):
        assert svne(diag_rho([1.0, 0.0, 0.0])) == 0.0

    def test_maximally_mixed(self):
        assert svne(diag_rho([1 / 3] * 3)) == pytest.approx(math.log2(3), abs=1e-12)

    def test_equal_pair(self):
        assert svne(diag_rho([0.5, 0.5, 0.0])) == pytest.approx(1.0, abs=1e-12)

    def test_positivity_violation(self):
        rho = ReducedDensityMatrix.from_matrix(
            np.diag([1.1, -0.1, 0.0]).astype(complex))
        with pytest.raises(PositivityError):
            svne(rho)

    def test_non_hermitian_rejected(self):
        m = np.diag([1.0, 0.0]).astype(complex)
        m[0, 1] = 0.5
        with pytest.raises(InvalidInputError):
            ReducedDensityMatrix.from_matrix(m)


class TestMandelQ:
    def test_coherent_poissonian(self):
        st = coherent_coefficients(math.sqrt(3.0), auto_cutoff(math.sqrt(3.0)))
        rho = ReducedDensityMatrix.from_matrix(
            np.outer(st.amplitudes, st.amplitudes.conj()),
            expected_trace=1 - st.tail_mass)
        assert abs(mandel_q(rho)) < 1e-6

    def test_fock_minus_one(self):
        p = np.zeros(6)
        p[4] = 1.0
        assert mandel_q(diag_rho(p)) == pytest.approx(-1.0, abs=1e-14)

    def test_vacuum_undefined(self):
        with pytest.raises(UndefinedObservableError):
            mandel_q(diag_rho([1.0, 0.0]))

    def test_matches_two_moment_formula(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = rng.random(12)
            p /= p.sum()
            q_ref = ((p @ np.arange(12.0) ** 2) - (p @ np.arange(12.0)) ** 2) \
                / (p @ np.arange(12.0)) - 1.0
            assert mandel_q(diag_rho(p)) == pytest.approx(q_ref, abs=1e-12)


class TestMeanPhoton:
    def test_fock(self):
        p = np.zeros(8)
        p[5] = 1.0
        assert mean_photon_number(diag_rho(p)) == 5.0

    def test_coherent(self):
        st = coherent_coefficients(math.sqrt(10.0), auto_cutoff(math.sqrt(10.0)))
        rho = ReducedDensityMatrix.from_matrix(
            np.outer(st.amplitudes, st.amplitudes.conj()),
            expected_trace=1 - st.tail_mass)
        assert mean_photon_number(rho) == pytest.approx(10.0, abs=1e-8)


class TestSeries:
    def setup_method(self):
        self.field0 = coherent_coefficients(1.0, auto_cutoff(1.0))
        self.ev = BipartiteEvolution(PARAMS, self.field0)

    def test_svne_starts_at_zero(self):
        s = series(self.ev, "svne", dt=1.0, n_times=1)
        assert s.values[0] == pytest.approx(0.0, abs=1e-9)

    def test_deterministic(self):
        s1 = series(self.ev, "mean_photon", dt=0.25, n_times=2000)
        s2 = series(self.ev, "mean_photon", dt=0.25, n_times=2000)
        np.testing.assert_array_equal(s1.values, s2.values)

    def test_chunking_invariance(self, monkeypatch):
        ref = series(self.ev, "mandel_q", dt=0.1, n_times=3000).values
        monkeypatch.setattr(_evolution, "_CHUNK_BUDGET", 7000)
        alt = series(self.ev, "mandel_q", dt=0.1, n_times=3000).values
        np.testing.assert_allclose(ref, alt, atol=1e-12)

    def test_matches_pointwise_densities(self):
        s = series(self.ev, "svne", dt=3.7, n_times=6)
        for k, t in enumerate(s.times):
            rho = atom_reduced_density(self.field0, self.ev.amplitudes_at(t))
            assert s.values[k] == pytest.approx(svne(rho), abs=1e-10)

    def test_excitation_exchange_conserved(self):
        n_pts = 200
        mean_n = series(self.ev, "mean_photon", dt=0.5, n_times=n_pts).values
        pops = np.empty(n_pts)
        for k in range(n_pts):
            rho = atom_reduced_density(self.field0,
                                       self.ev.amplitudes_at(0.5 * k))
            pops[k] = rho.matrix[0, 0].real + rho.matrix[1, 1].real
        total = mean_n + pops
        assert np.max(np.abs(total - total[0])) < 1e-10

    def test_resource_ceiling(self, monkeypatch):
        import vatom.observables as obs

        with pytest.raises(ResourceLimitError):
            series(self.ev, "svne", dt=1.0, n_times=SERIES_POINT_CEILING + 1)
        monkeypatch.setattr(obs, "SERIES_POINT_CEILING", 64)
        s = obs.series(self.ev, "svne", dt=1.0, n_times=100, allow_partial=True)
        assert len(s) == 64

    def test_unknown_observable(self):
        with pytest.raises(InvalidInputError):
            series(self.ev, "entropy_of_everything", dt=1.0, n_times=4)

    def test_tripartite_mean_photon_against_density(self):
        params = TripartiteParams(5.0, 5.0, 1.0, 1.0)
        f1 = coherent_coefficients(1.0, auto_cutoff(1.0))
        f2 = coherent_coefficients(1.0, auto_cutoff(1.0))
        ev = TripartiteEvolution(params, f1, f2)
        s = series(ev, "mean_photon", dt=1.1, n_times=5)
        from vatom import field1_reduced_density

        for k, t in enumerate(s.times):
            rho = field1_reduced_density(f1, f2, ev.amplitudes_at(t))
            assert s.values[k] == pytest.approx(mean_photon_number(rho), abs=1e-10)

    def test_tripartite_q_and_svne_against_density(self):
        params = TripartiteParams(5.0, 5.0, 1.0, 1.0)
        f1 = coherent_coefficients(1.0, auto_cutoff(1.0))
        f2 = coherent_coefficients(1.0, auto_cutoff(1.0))
        ev = TripartiteEvolution(params, f1, f2)
        sq = series(ev, "mandel_q", dt=1.7, n_times=4)
        se = series(ev, "svne", dt=1.7, n_times=4)
        from vatom import field1_reduced_density

        for k, t in enumerate(sq.times):
            rho = field1_reduced_density(f1, f2, ev.amplitudes_at(t))
            assert sq.values[k] == pytest.approx(mandel_q(rho), abs=1e-10)
            assert se.values[k] == pytest.approx(svne(rho), abs=1e-8)


class TestSeriesContainer:
    def test_nonfinite_rejected(self):
        from vatom.observables import ObservableSeries

        with pytest.raises(InvalidInputError):
            ObservableSeries(np.array([1.0, np.nan]), dt=1.0, label="x")

    def test_times(self):
        from vatom.observables import ObservableSeries

        s = ObservableSeries(np.array([0.0, 0.5, 1.0]), dt=0.25, label="x")
        np.testing.assert_allclose(s.times, [0.0, 0.25, 0.5])
