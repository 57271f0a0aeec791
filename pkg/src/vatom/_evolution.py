"""Shared machinery for evaluating stacked sector solutions over time grids."""

from __future__ import annotations

import numpy as np

from . import ode_oracle
from .eigenmodes import SectorModes

# amplitude chunks are sized to roughly this many complex entries
_CHUNK_BUDGET = 4_000_000


def stack_modes(modes: list[SectorModes | None]):
    """Pack per-sector mode data into (S, 3) arrays.

    Sectors without closed-form modes (degenerate roots) get zero rows and
    their indices are returned so callers can integrate them instead.
    """
    n = len(modes)
    mu = np.zeros((n, 3))
    coef_a = np.zeros((n, 3))
    coef_b = np.zeros((n, 3))
    coef_c = np.zeros((n, 3))
    fallback = []
    for i, md in enumerate(modes):
        if md is None:
            fallback.append(i)
            continue
        mu[i] = md.mu
        coef_a[i] = md.coef_a
        coef_b[i] = md.coef_b
        coef_c[i] = md.coef_c
    return mu, coef_a, coef_b, coef_c, np.array(fallback, dtype=int)


def chunk_size(n_sectors: int) -> int:
    return max(16, _CHUNK_BUDGET // max(1, 3 * n_sectors))


def uniform_phase_blocks(mu: np.ndarray, t0: float, dt: float, n_times: int,
                         chunk: int):
    """Yield (offset, P) with P[k, s, j] = exp(i mu[s, j] (t0 + (offset+k) dt)).

    Each block is anchored with exact exponentials at its first row and
    extended by cumulative products, so phase drift stays below
    ~chunk * eps regardless of series length.
    """
    step = np.exp(1j * mu * dt)
    for off in range(0, n_times, chunk):
        k = min(chunk, n_times - off)
        block = np.empty((k,) + mu.shape, dtype=np.complex128)
        block[0] = np.exp(1j * mu * (t0 + off * dt))
        if k > 1:
            np.cumprod(np.broadcast_to(step, (k - 1,) + mu.shape),
                       axis=0, out=block[1:])
            block[1:] *= block[0]
        yield off, block


def phases_at(mu: np.ndarray, t: np.ndarray) -> np.ndarray:
    """P[k, s, j] = exp(i mu[s, j] t[k]) for arbitrary (non-uniform) times."""
    return np.exp(1j * mu[None, :, :] * np.asarray(t, dtype=float)[:, None, None])


def amplitudes_from_phases(block: np.ndarray, coef_a, coef_b, coef_c):
    """Contract a phase block (T, S, 3) with the coefficient arrays."""
    a = np.einsum("tsj,sj->ts", block, coef_a)
    b = np.einsum("tsj,sj->ts", block, coef_b)
    c = np.einsum("tsj,sj->ts", block, coef_c)
    return a, b, c


def integrate_fallback(coeff_rows: np.ndarray, t: np.ndarray,
                       tolerance: float = 1e-10):
    """Oracle trajectories for degenerate sectors at the requested times.

    Returns (n_sectors, n_times, 3). Times need not be sorted.
    """
    t = np.asarray(t, dtype=float)
    order = np.argsort(t)
    t_sorted = t[order]
    grid = t_sorted
    prepend_zero = t_sorted[0] > 0.0
    if prepend_zero:
        grid = np.concatenate(([0.0], t_sorted))
    t_end = float(grid[-1]) if grid[-1] > 0 else 1.0
    steps = np.array([
        ode_oracle.auto_step(r[0], r[1], r[2], r[3], r[4], t_end, tolerance)
        for r in coeff_rows
    ])
    traj = ode_oracle.integrate_sectors(coeff_rows, grid, steps)
    if prepend_zero:
        traj = traj[:, 1:, :]
    out = np.empty_like(traj)
    out[:, order, :] = traj
    return out
