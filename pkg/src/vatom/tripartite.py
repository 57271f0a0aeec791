"""Exact dynamics of the V-type atom coupled to two independent Kerr modes.

Mode F1 drives |1> <-> |3| transitions and F2 drives |2> <-> |3>. With the
atom starting in |1> and product field states q_n, r_m, the state at time
t is sum_{n,m} q_n r_m { A_nm |1;n;m> + B_nm |2;n+1;m-1> + C_nm |3;n+1;m> },
with B_n0 = 0: sectors with m = 0 reduce to a two-level A <-> C system.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import _evolution
from .eigenmodes import SectorModes, sector_modes
from .errors import DegenerateModesError, InvalidInputError
from .field_states import FieldState
from .observables import ReducedDensityMatrix, entropy_from_eigenvalues


@dataclass(frozen=True)
class TripartiteParams:
    """Kerr strengths and couplings of the two modes; detunings must stay zero."""

    chi1: float
    chi2: float
    lambda1: float
    lambda2: float
    detuning1: float = 0.0
    detuning2: float = 0.0
    omega_field1: float | None = None
    omega_field2: float | None = None
    omega_atom: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.chi1 < 0 or self.chi2 < 0:
            raise InvalidInputError("Kerr strengths must be >= 0")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("couplings must be >= 0")

    def require_analytic(self):
        if self.detuning1 != 0.0 or self.detuning2 != 0.0:
            raise InvalidInputError(
                "closed-form evolution requires zero detunings; "
                f"got ({self.detuning1}, {self.detuning2})"
            )


@dataclass(frozen=True)
class TripartiteSector:
    """Photon sector (n, m) with its Kerr phase rates and couplings."""

    n: int
    m: int
    V11: float
    V12: float
    V21: float
    V22: float
    f1: float
    f2: float
    modes: SectorModes | None

    @property
    def needs_fallback(self) -> bool:
        return self.modes is None


@dataclass(frozen=True)
class TripartiteAmplitudes:
    """Amplitude grids (A, B, C), each indexed [n, m], at one time."""

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def _sector_rates(n: int, m: int, params: TripartiteParams):
    V11 = params.chi1 * n * (n - 1)
    V12 = params.chi1 * n * (n + 1)
    V21 = params.chi2 * (m - 1) * (m - 2)
    V22 = params.chi2 * m * (m - 1)
    f1 = params.lambda1 * sqrt(n + 1)
    f2 = params.lambda2 * sqrt(m)
    return V11, V12, V21, V22, f1, f2


def _sector_diagonal(sector: TripartiteSector):
    return (sector.V11 + sector.V22, sector.V12 + sector.V21,
            sector.V12 + sector.V22)


def build_sector_2mode(n: int, m: int, params: TripartiteParams) -> TripartiteSector:
    """Sector (n, m); m = 0 automatically lands on the two-level branch (f2 = 0)."""
    if n < 0 or m < 0:
        raise InvalidInputError(f"photon indices must be >= 0, got ({n}, {m})")
    params.require_analytic()
    V11, V12, V21, V22, f1, f2 = _sector_rates(n, m, params)
    try:
        modes = sector_modes(V11 + V22, V12 + V21, V12 + V22, f1, f2)
    except DegenerateModesError:
        modes = None
    return TripartiteSector(n, m, V11, V12, V21, V22, f1, f2, modes)


def sector_amplitudes_2mode(sector: TripartiteSector, t) -> tuple:
    """(A_nm, B_nm, C_nm) at scalar or array t."""
    if sector.modes is not None:
        return sector.modes.amplitudes(t)
    d_a, d_b, d_c = _sector_diagonal(sector)
    rows = np.array([[d_a, d_b, d_c, sector.f1, sector.f2]])
    traj = _evolution.integrate_fallback(rows, np.atleast_1d(np.asarray(t, float)))
    a, b, c = traj[0, :, 0], traj[0, :, 1], traj[0, :, 2]
    if np.isscalar(t) or np.ndim(t) == 0:
        return a[0], b[0], c[0]
    return a, b, c


class TripartiteEvolution:
    """Cached sector modes over the (n, m) grid for fixed initial fields."""

    def __init__(self, params: TripartiteParams, field1_0: FieldState,
                 field2_0: FieldState):
        params.require_analytic()
        self.params = params
        self.field1_0 = field1_0
        self.field2_0 = field2_0
        self.n_max = field1_0.cutoff
        self.m_max = field2_0.cutoff
        self.sectors = [
            build_sector_2mode(n, m, params)
            for n in range(self.n_max + 1)
            for m in range(self.m_max + 1)
        ]
        mu, ca, cb, cc, fb = _evolution.stack_modes([s.modes for s in self.sectors])
        self._mu, self._ca, self._cb, self._cc = mu, ca, cb, cc
        self._fallback = fb
        self._fallback_rows = np.array(
            [(*_sector_diagonal(s), s.f1, s.f2)
             for s in (self.sectors[i] for i in fb)]
        ).reshape(len(fb), 5)
        self._q = np.asarray(field1_0.amplitudes)
        self._r = np.asarray(field2_0.amplitudes)
        # per-sector weight |q_n r_m|^2, flattened in sector order
        self._w = np.outer(np.abs(self._q) ** 2, np.abs(self._r) ** 2).ravel()

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.n_max + 1, self.m_max + 1)

    def describe(self) -> str:
        p = self.params
        return (f"tripartite chi1={p.chi1} chi2={p.chi2} lambda1={p.lambda1} "
                f"lambda2={p.lambda2} cutoffs=({self.n_max},{self.m_max})")

    def combined_tail(self) -> float:
        kept = (1.0 - self.field1_0.tail_mass) * (1.0 - self.field2_0.tail_mass)
        return 1.0 - kept

    def _patch_fallback(self, a, b, c, t):
        if self._fallback.size == 0:
            return
        traj = _evolution.integrate_fallback(self._fallback_rows, t)
        a[:, self._fallback] = traj[:, :, 0].T
        b[:, self._fallback] = traj[:, :, 1].T
        c[:, self._fallback] = traj[:, :, 2].T

    def amplitude_blocks(self, t0: float, dt: float, n_times: int):
        """Yield (offset, A, B, C) with shapes (k, n_sectors)."""
        chunk = _evolution.chunk_size(len(self.sectors))
        for off, block in _evolution.uniform_phase_blocks(
                self._mu, t0, dt, n_times, chunk):
            a, b, c = _evolution.amplitudes_from_phases(
                block, self._ca, self._cb, self._cc)
            self._patch_fallback(a, b, c, t0 + dt * (off + np.arange(a.shape[0])))
            yield off, a, b, c

    def amplitudes_at(self, t) -> TripartiteAmplitudes:
        t = float(t)
        block = _evolution.phases_at(self._mu, np.array([t]))
        a, b, c = _evolution.amplitudes_from_phases(block, self._ca, self._cb, self._cc)
        self._patch_fallback(a, b, c, np.array([t]))
        shape = self.grid_shape
        return TripartiteAmplitudes(t, a[0].reshape(shape), b[0].reshape(shape),
                                    c[0].reshape(shape))

    # -- observable kernels ---------------------------------------------------

    def series_values(self, which: str, t0: float, dt: float, n_times: int) -> np.ndarray:
        if which == "mean_photon":
            return self._mean_photon(t0, dt, n_times)
        if which == "svne":
            return self._svne(t0, dt, n_times)
        if which == "mandel_q":
            return self._mandel_q(t0, dt, n_times)
        raise InvalidInputError(f"unknown observable {which!r}")

    def _mean_photon(self, t0, dt, n_times):
        n_grid = np.repeat(np.arange(self.n_max + 1), self.m_max + 1)
        w_a = self._w * n_grid
        w_bc = self._w * (n_grid + 1)
        out = np.empty(n_times)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            k = a.shape[0]
            out[off:off + k] = (np.abs(a) ** 2 @ w_a
                                + (np.abs(b) ** 2 + np.abs(c) ** 2) @ w_bc)
        return out

    def _mandel_q(self, t0, dt, n_times):
        shape = self.grid_shape
        nu = np.arange(self.n_max + 2)
        out = np.empty(n_times)
        w2 = self._w.reshape(shape)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            k = a.shape[0]
            pa = np.einsum("tnm,nm->tn", np.abs(a.reshape(k, *shape)) ** 2, w2)
            pbc = np.einsum("tnm,nm->tn",
                            np.abs(b.reshape(k, *shape)) ** 2
                            + np.abs(c.reshape(k, *shape)) ** 2, w2)
            p = np.zeros((k, self.n_max + 2))
            p[:, :-1] = pa
            p[:, 1:] += pbc
            m1 = p @ nu
            m2 = p @ (nu.astype(float) ** 2)
            out[off:off + k] = (m2 - m1 ** 2) / m1 - 1.0
        return out

    def _svne(self, t0, dt, n_times):
        out = np.empty(n_times)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            x, y, z = self._mode1_vectors(a, b, c)
            rho = (np.einsum("tnl,tml->tnm", x, np.conj(x))
                   + np.einsum("tnl,tml->tnm", y, np.conj(y))
                   + np.einsum("tnl,tml->tnm", z, np.conj(z)))
            out[off:off + a.shape[0]] = entropy_from_eigenvalues(
                np.linalg.eigvalsh(rho))
        return out

    def _mode1_vectors(self, a, b, c):
        """Conditional F2 row vectors of the three atom branches, per time.

        Shapes (k, n_max+2, m_max+2), indexed by the F1 photon number:
        the A branch sits at F1 index n, the B and C branches at n+1.
        """
        k = a.shape[0]
        shape = self.grid_shape
        q, r = self._q, self._r
        x = np.zeros((k, self.n_max + 2, self.m_max + 2), dtype=np.complex128)
        y = np.zeros_like(x)
        z = np.zeros_like(x)
        qr = np.outer(q, r)
        x[:, :-1, :-1] = a.reshape(k, *shape) * qr
        y[:, 1:, :-2] = (b.reshape(k, *shape) * qr)[:, :, 1:]
        z[:, 1:, :-1] = c.reshape(k, *shape) * qr
        return x, y, z


def field1_reduced_density(field1_0: FieldState, field2_0: FieldState,
                           amplitudes: TripartiteAmplitudes) -> ReducedDensityMatrix:
    """Density matrix of mode F1 on 0..cutoff1+1, traced over atom and F2."""
    x, y, z = _branch_vectors(field1_0, field2_0, amplitudes)
    rho = (x @ x.conj().T) + (y @ y.conj().T) + (z @ z.conj().T)
    kept = (1.0 - field1_0.tail_mass) * (1.0 - field2_0.tail_mass)
    return ReducedDensityMatrix.from_matrix(rho, expected_trace=kept)


def complement_reduced_density(field1_0: FieldState, field2_0: FieldState,
                               amplitudes: TripartiteAmplitudes) -> ReducedDensityMatrix:
    """Density matrix of the complementary subsystem (atom together with F2)."""
    x, y, z = _branch_vectors(field1_0, field2_0, amplitudes)
    w = np.concatenate([x, y, z], axis=1)  # rows: F1 index; cols: (atom, F2)
    rho = w.T @ np.conj(w)
    kept = (1.0 - field1_0.tail_mass) * (1.0 - field2_0.tail_mass)
    return ReducedDensityMatrix.from_matrix(rho, expected_trace=kept)


def _branch_vectors(field1_0: FieldState, field2_0: FieldState,
                    amplitudes: TripartiteAmplitudes):
    """Weighted branch amplitudes by F1 index: A at n, B and C shifted to n+1."""
    q = np.asarray(field1_0.amplitudes)
    r = np.asarray(field2_0.amplitudes)
    n1, m1 = q.size, r.size
    qr = np.outer(q, r)
    x = np.zeros((n1 + 1, m1 + 1), dtype=np.complex128)
    y = np.zeros_like(x)
    z = np.zeros_like(x)
    x[:-1, :-1] = amplitudes.A * qr
    y[1:, :-2] = (amplitudes.B * qr)[:, 1:]
    z[1:, :-1] = amplitudes.C * qr
    return x, y, z
