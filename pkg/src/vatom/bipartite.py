"""Exact interaction-picture dynamics of the V-type atom with one Kerr mode.

The joint state at time t is sum_n q_n { A_n |1;n> + B_n |2;n> +
C_{n+1} |3;n+1> } with the atom starting in |1> and the field in the
superposition q_n. Each photon sector n evolves independently through a
three-mode linear system; the closed forms are cached per sector so long
time series cost one complex exponential per mode and step.
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
class BipartiteParams:
    """Kerr strength, couplings, and (bookkeeping-only) detunings/carriers.

    The closed-form evolution is only valid at zero detuning; carrier
    frequencies drop out of the interaction picture there and are kept
    purely as metadata.
    """

    chi: float
    lambda1: float
    lambda2: float
    detuning1: float = 0.0
    detuning2: float = 0.0
    omega_field: float | None = None
    omega_atom: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.chi < 0:
            raise InvalidInputError(f"chi must be >= 0, got {self.chi}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("couplings must be >= 0")

    def require_analytic(self):
        if self.detuning1 != 0.0 or self.detuning2 != 0.0:
            raise InvalidInputError(
                "closed-form evolution requires zero detunings; "
                f"got ({self.detuning1}, {self.detuning2})"
            )


@dataclass(frozen=True)
class BipartiteSector:
    """Photon sector n: Kerr phase rates, effective couplings, cached modes.

    ``modes`` is None when the characteristic roots are too close for the
    closed form; such sectors are evolved by the integrator.
    """

    n: int
    V1: float
    V2: float
    f1: float
    f2: float
    modes: SectorModes | None

    @property
    def needs_fallback(self) -> bool:
        return self.modes is None


@dataclass(frozen=True)
class BipartiteAmplitudes:
    """Sector amplitude triples (A_n, B_n, C_{n+1}) for n = 0..cutoff at one time."""

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def build_sector(n: int, params: BipartiteParams) -> BipartiteSector:
    """Sector parameters V1 = chi n(n-1), V2 = chi n(n+1), f_i = lambda_i sqrt(n+1)."""
    if n < 0:
        raise InvalidInputError(f"photon index must be >= 0, got {n}")
    params.require_analytic()
    V1 = params.chi * n * (n - 1)
    V2 = params.chi * n * (n + 1)
    f1 = params.lambda1 * sqrt(n + 1)
    f2 = params.lambda2 * sqrt(n + 1)
    try:
        modes = sector_modes(V1, V1, V2, f1, f2)
    except DegenerateModesError:
        modes = None
    return BipartiteSector(n, V1, V2, f1, f2, modes)


def sector_amplitudes(sector: BipartiteSector, t) -> tuple:
    """(A_n, B_n, C_{n+1}) at scalar or array t."""
    if sector.modes is not None:
        return sector.modes.amplitudes(t)
    rows = np.array([[sector.V1, sector.V1, sector.V2, sector.f1, sector.f2]])
    traj = _evolution.integrate_fallback(rows, np.atleast_1d(np.asarray(t, float)))
    a, b, c = traj[0, :, 0], traj[0, :, 1], traj[0, :, 2]
    if np.isscalar(t) or np.ndim(t) == 0:
        return a[0], b[0], c[0]
    return a, b, c


class BipartiteEvolution:
    """Cached sector modes for one (params, initial field state) pair."""

    def __init__(self, params: BipartiteParams, field0: FieldState):
        params.require_analytic()
        self.params = params
        self.field0 = field0
        self.sectors = [build_sector(n, params) for n in range(field0.cutoff + 1)]
        mu, ca, cb, cc, fb = _evolution.stack_modes([s.modes for s in self.sectors])
        self._mu, self._ca, self._cb, self._cc = mu, ca, cb, cc
        self._fallback = fb
        self._fallback_rows = np.array(
            [[s.V1, s.V1, s.V2, s.f1, s.f2]
             for s in (self.sectors[i] for i in fb)]
        ).reshape(len(fb), 5)
        self._q = np.asarray(field0.amplitudes)
        self._q2 = np.abs(self._q) ** 2

    @property
    def cutoff(self) -> int:
        return self.field0.cutoff

    def describe(self) -> str:
        p = self.params
        return (f"bipartite chi={p.chi} lambda1={p.lambda1} lambda2={p.lambda2} "
                f"cutoff={self.cutoff}")

    def _patch_fallback(self, a, b, c, t):
        if self._fallback.size == 0:
            return
        traj = _evolution.integrate_fallback(self._fallback_rows, t)
        a[:, self._fallback] = traj[:, :, 0].T
        b[:, self._fallback] = traj[:, :, 1].T
        c[:, self._fallback] = traj[:, :, 2].T

    def amplitude_blocks(self, t0: float, dt: float, n_times: int):
        """Yield (offset, A, B, C) blocks over a uniform grid; shapes (k, S)."""
        chunk = _evolution.chunk_size(len(self.sectors))
        for off, block in _evolution.uniform_phase_blocks(
                self._mu, t0, dt, n_times, chunk):
            a, b, c = _evolution.amplitudes_from_phases(
                block, self._ca, self._cb, self._cc)
            self._patch_fallback(a, b, c, t0 + dt * (off + np.arange(a.shape[0])))
            yield off, a, b, c

    def amplitudes_at(self, t) -> BipartiteAmplitudes:
        """All sector triples at one time."""
        t = float(t)
        block = _evolution.phases_at(self._mu, np.array([t]))
        a, b, c = _evolution.amplitudes_from_phases(block, self._ca, self._cb, self._cc)
        self._patch_fallback(a, b, c, np.array([t]))
        return BipartiteAmplitudes(t, a[0], b[0], c[0])

    # -- observable kernels over uniform grids -------------------------------

    def series_values(self, which: str, t0: float, dt: float, n_times: int) -> np.ndarray:
        if which == "mean_photon":
            return self._mean_photon(t0, dt, n_times)
        if which == "svne":
            return self._svne(t0, dt, n_times)
        if which == "mandel_q":
            return self._mandel_q(t0, dt, n_times)
        raise InvalidInputError(f"unknown observable {which!r}")

    def _mean_photon(self, t0, dt, n_times):
        n_idx = np.arange(self.cutoff + 1)
        w_ab = self._q2 * n_idx
        w_c = self._q2 * (n_idx + 1)
        out = np.empty(n_times)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            k = a.shape[0]
            out[off:off + k] = ((np.abs(a) ** 2 + np.abs(b) ** 2) @ w_ab
                                + np.abs(c) ** 2 @ w_c)
        return out

    def _svne(self, t0, dt, n_times):
        out = np.empty(n_times)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            rho = self._atom_rho_batch(a, b, c)
            out[off:off + a.shape[0]] = entropy_from_eigenvalues(
                np.linalg.eigvalsh(rho))
        return out

    def _mandel_q(self, t0, dt, n_times):
        n_idx = np.arange(self.cutoff + 2)
        out = np.empty(n_times)
        for off, a, b, c in self.amplitude_blocks(t0, dt, n_times):
            k = a.shape[0]
            p = np.zeros((k, self.cutoff + 2))
            p[:, :-1] = (np.abs(a) ** 2 + np.abs(b) ** 2) * self._q2
            p[:, 1:] += np.abs(c) ** 2 * self._q2
            m1 = p @ n_idx
            m2 = p @ (n_idx ** 2)
            out[off:off + k] = (m2 - m1 ** 2) / m1 - 1.0
        return out

    def _atom_rho_batch(self, a, b, c) -> np.ndarray:
        """Stacked 3x3 atom density matrices for amplitude blocks (k, S)."""
        q, q2 = self._q, self._q2
        qq = q[1:] * np.conj(q[:-1])  # q_n q*_{n-1}
        k = a.shape[0]
        rho = np.empty((k, 3, 3), dtype=np.complex128)
        rho[:, 0, 0] = (np.abs(a) ** 2) @ q2
        rho[:, 1, 1] = (np.abs(b) ** 2) @ q2
        rho[:, 2, 2] = (np.abs(c) ** 2) @ q2
        rho[:, 0, 1] = (a * np.conj(b)) @ q2
        # C_n pairs with A_n, B_n through the shifted field index
        rho[:, 0, 2] = (a[:, 1:] * np.conj(c[:, :-1])) @ qq
        rho[:, 1, 2] = (b[:, 1:] * np.conj(c[:, :-1])) @ qq
        rho[:, 1, 0] = np.conj(rho[:, 0, 1])
        rho[:, 2, 0] = np.conj(rho[:, 0, 2])
        rho[:, 2, 1] = np.conj(rho[:, 1, 2])
        return rho


def atom_reduced_density(field0: FieldState,
                         amplitudes: BipartiteAmplitudes) -> ReducedDensityMatrix:
    """3x3 atom density matrix from the sector amplitudes at one time."""
    ev_q = np.asarray(field0.amplitudes)
    q2 = np.abs(ev_q) ** 2
    a, b, c = amplitudes.A, amplitudes.B, amplitudes.C
    qq = ev_q[1:] * np.conj(ev_q[:-1])
    rho = np.empty((3, 3), dtype=np.complex128)
    rho[0, 0] = np.abs(a) ** 2 @ q2
    rho[1, 1] = np.abs(b) ** 2 @ q2
    rho[2, 2] = np.abs(c) ** 2 @ q2
    rho[0, 1] = (a * np.conj(b)) @ q2
    rho[0, 2] = (a[1:] * np.conj(c[:-1])) @ qq
    rho[1, 2] = (b[1:] * np.conj(c[:-1])) @ qq
    rho[1, 0] = np.conj(rho[0, 1])
    rho[2, 0] = np.conj(rho[0, 2])
    rho[2, 1] = np.conj(rho[1, 2])
    return ReducedDensityMatrix.from_matrix(rho, expected_trace=1.0 - field0.tail_mass)


def field_reduced_density(field0: FieldState,
                          amplitudes: BipartiteAmplitudes) -> ReducedDensityMatrix:
    """Field density matrix on 0..cutoff+1 (the C branch feeds index n+1)."""
    q = np.asarray(field0.amplitudes)
    dim = field0.cutoff + 2
    u = np.zeros(dim, dtype=np.complex128)
    v = np.zeros(dim, dtype=np.complex128)
    w = np.zeros(dim, dtype=np.complex128)
    u[:-1] = q * amplitudes.A
    v[:-1] = q * amplitudes.B
    w[1:] = q * amplitudes.C
    rho = np.outer(u, np.conj(u)) + np.outer(v, np.conj(v)) + np.outer(w, np.conj(w))
    return ReducedDensityMatrix.from_matrix(rho, expected_trace=1.0 - field0.tail_mass)
