import math

import numpy as np
import pytest

from vatom import (
    BipartiteEvolution,
    BipartiteParams,
    atom_reduced_density,
    auto_cutoff,
    build_sector,
    coherent_coefficients,
    field_reduced_density,
    sector_amplitudes,
    svne,
)
from vatom.eigenmodes import KIND_CUBIC, KIND_PHASE
from vatom.errors import InvalidInputError
from vatom.ode_oracle import auto_step, integrate_sectors

PARAMS = BipartiteParams(chi=5.0, lambda1=1.0, lambda2=1.0)


def oracle_full_state(params, field0, t, tol=1e-10):
    """Independent state assembly: integrate every sector, lay out the
    (atom, field) tensor explicitly, and return psi with shape (3, N+2)."""
    q = field0.amplitudes
    n_sec = field0.cutoff + 1
    rows = []
    for n in range(n_sec):
        s = build_sector(n, params)
        rows.append([s.V1, s.V1, s.V2, s.f1, s.f2])
    rows = np.array(rows)
    steps = np.array([auto_step(*r, max(t, 1e-6), tol) for r in rows])
    traj = integrate_sectors(rows, np.array([0.0, t]), steps)[:, 1, :]
    psi = np.zeros((3, field0.cutoff + 2), dtype=complex)
    for n in range(n_sec):
        psi[0, n] += q[n] * traj[n, 0]
        psi[1, n] += q[n] * traj[n, 1]
        psi[2, n + 1] += q[n] * traj[n, 2]
    return psi


class TestSectorBuild:
    def test_n_zero(self):
        sec = build_sector(0, BipartiteParams(chi=7.0, lambda1=1.0, lambda2=1.0))
        assert sec.V1 == 0.0 and sec.V2 == 0.0
        assert sec.f1 == 1.0 and sec.f2 == 1.0
        np.testing.assert_allclose(
            sec.modes.mu, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-14)

    def test_n_two_rates(self):
        sec = build_sector(2, PARAMS)
        assert sec.V1 == 10.0 and sec.V2 == 30.0
        assert sec.f1 == pytest.approx(math.sqrt(3))
        assert sec.f2 == pytest.approx(math.sqrt(3))
        assert sec.modes.kind == KIND_CUBIC

    def test_zero_coupling_decoupled(self):
        sec = build_sector(4, BipartiteParams(chi=2.0, lambda1=0.0, lambda2=0.0))
        assert sec.modes.kind == KIND_PHASE

    def test_negative_index_rejected(self):
        with pytest.raises(InvalidInputError):
            build_sector(-1, PARAMS)

    def test_nonzero_detuning_rejected(self):
        params = BipartiteParams(chi=1.0, lambda1=1.0, lambda2=1.0, detuning1=0.5)
        with pytest.raises(InvalidInputError):
            build_sector(0, params)


class TestSectorAmplitudes:
    def test_initial_condition(self):
        sec = build_sector(5, PARAMS)
        a, b, c = sector_amplitudes(sec, 0.0)
        assert a == pytest.approx(1.0, abs=1e-13)
        assert abs(b) < 1e-13 and abs(c) < 1e-13

    def test_chi_zero_closed_form(self):
        lam = 1.0
        params = BipartiteParams(chi=0.0, lambda1=lam, lambda2=lam)
        t = np.linspace(0.0, 12.0, 50)
        for n in (0, 1, 5, 20):
            sec = build_sector(n, params)
            a, b, c = sector_amplitudes(sec, t)
            rabi = math.sqrt(2.0) * lam * math.sqrt(n + 1)
            np.testing.assert_allclose(a, (1 + np.cos(rabi * t)) / 2, atol=1e-10)
            np.testing.assert_allclose(b, (np.cos(rabi * t) - 1) / 2, atol=1e-10)
            np.testing.assert_allclose(
                np.abs(c), np.abs(np.sin(rabi * t)) / math.sqrt(2), atol=1e-10)

    def test_unitarity(self):
        t = np.linspace(0.0, 40.0, 101)
        for n in (0, 3, 17):
            sec = build_sector(n, PARAMS)
            a, b, c = sector_amplitudes(sec, t)
            np.testing.assert_allclose(
                np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2, 1.0, atol=1e-10)

    def test_degenerate_sector_falls_back(self):
        params = BipartiteParams(chi=1e5, lambda1=1e-4, lambda2=1e-4)
        sec = build_sector(2, params)
        assert sec.needs_fallback
        t = np.array([0.0, 5e-4, 1e-3])
        a, b, c = sector_amplitudes(sec, t)
        norm = np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2
        np.testing.assert_allclose(norm, 1.0, atol=1e-9)
        assert a[0] == pytest.approx(1.0, abs=1e-12)


class TestReducedDensities:
    def setup_method(self):
        self.field0 = coherent_coefficients(1.0, auto_cutoff(1.0))
        self.ev = BipartiteEvolution(PARAMS, self.field0)

    def test_atom_initial(self):
        rho = atom_reduced_density(self.field0, self.ev.amplitudes_at(0.0))
        np.testing.assert_allclose(np.diag(rho.matrix).real, [1.0, 0.0, 0.0],
                                   atol=1e-10)

    def test_atom_decoupled(self):
        params = BipartiteParams(chi=3.0, lambda1=0.0, lambda2=0.0)
        ev = BipartiteEvolution(params, self.field0)
        rho = atom_reduced_density(self.field0, ev.amplitudes_at(8.0))
        np.testing.assert_allclose(rho.matrix, np.diag([1.0, 0.0, 0.0]), atol=1e-10)

    def test_field_initial_projector(self):
        rho = field_reduced_density(self.field0, self.ev.amplitudes_at(0.0))
        q = np.zeros(self.field0.cutoff + 2, dtype=complex)
        q[:-1] = self.field0.amplitudes
        np.testing.assert_allclose(rho.matrix, np.outer(q, q.conj()), atol=1e-12)
        evals = np.linalg.eigvalsh(rho.matrix)
        assert np.sum(evals > 1e-10) == 1

    def test_field_decoupled_diagonal(self):
        params = BipartiteParams(chi=3.0, lambda1=0.0, lambda2=0.0)
        ev = BipartiteEvolution(params, self.field0)
        for t in (1.0, 5.5):
            rho = field_reduced_density(self.field0, ev.amplitudes_at(t))
            np.testing.assert_allclose(
                np.diag(rho.matrix).real[:-1], self.field0.probabilities, atol=1e-12)

    def test_against_oracle_partial_trace(self):
        t = 1.0
        psi = oracle_full_state(PARAMS, self.field0, t)
        rho_a_ref = np.einsum("jn,kn->jk", psi, psi.conj())
        rho_f_ref = np.einsum("jn,jm->nm", psi, psi.conj())
        amps = self.ev.amplitudes_at(t)
        rho_a = atom_reduced_density(self.field0, amps)
        rho_f = field_reduced_density(self.field0, amps)
        assert np.max(np.abs(rho_a.matrix - rho_a_ref)) < 1e-8
        assert np.max(np.abs(rho_f.matrix - rho_f_ref)) < 1e-8

    def test_schmidt_symmetry_and_positivity(self):
        for t in (0.3, 2.0, 47.0):
            amps = self.ev.amplitudes_at(t)
            rho_a = atom_reduced_density(self.field0, amps)
            rho_f = field_reduced_density(self.field0, amps)
            assert abs(svne(rho_a) - svne(rho_f)) < 1e-8
            for rho in (rho_a, rho_f):
                assert np.min(np.linalg.eigvalsh(rho.matrix)) > -1e-10

    def test_field_schmidt_rank_at_most_three(self):
        amps = self.ev.amplitudes_at(13.7)
        rho_f = field_reduced_density(self.field0, amps)
        evals = np.linalg.eigvalsh(rho_f.matrix)
        assert np.sum(evals > 1e-10) <= 3

    def test_global_normalization(self):
        q2 = self.field0.probabilities
        for t in (0.0, 1.7, 25.0):
            amps = self.ev.amplitudes_at(t)
            total = float(q2 @ (np.abs(amps.A) ** 2 + np.abs(amps.B) ** 2
                                + np.abs(amps.C) ** 2))
            assert abs(total - (1.0 - self.field0.tail_mass)) < 1e-10
