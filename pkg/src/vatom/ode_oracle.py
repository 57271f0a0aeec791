"""Independent numerical evolution used to validate the closed forms.

The sector equations are integrated with a fixed-step classical
Runge-Kutta (order 4) scheme. To keep the phase error small over long
runs, the integrator works on the trace-shifted system (subtracting the
mean diagonal, a multiple of the identity) and the exact scalar phase
e^{-i g t} is reapplied at the sample times. The shifted system is
autonomous, so no trigonometric evaluations occur inside the step loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import StepSizeError
from .field_states import FieldState

NORM_DRIFT_BOUND = 1e-9


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 configuration.

    ``step`` is an upper bound on the internal step; the actual step is
    shrunk so that an integer number of steps lands on each sample time.
    ``tolerance`` is the accuracy target used by auto_step and by
    step-halving verification.
    """

    step: float
    t_end: float
    n_samples: int = 101
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.n_samples < 2:
            raise ValueError("need at least two sample points")

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_samples)


def shifted_frequency_bound(d_a: float, d_b: float, d_c: float,
                            f1: float, f2: float) -> float:
    """Frobenius bound on the spectral radius of the trace-shifted sector matrix."""
    g = (d_a + d_b + d_c) / 3.0
    pa, pb, pc = d_a - g, d_b - g, d_c - g
    return math.sqrt(pa * pa + pb * pb + pc * pc + 2.0 * (f1 * f1 + f2 * f2))


def auto_step(d_a: float, d_b: float, d_c: float, f1: float, f2: float,
              t_end: float, tolerance: float = 1e-9) -> float:
    """Step size for which the accumulated RK4 phase error stays below tolerance.

    Uses the local error (omega h)^5 / 120 of RK4 on a pure phase at the
    sector's shifted frequency bound, accumulated over t_end.
    """
    omega = shifted_frequency_bound(d_a, d_b, d_c, f1, f2)
    if omega == 0.0 or t_end == 0.0:
        return max(t_end, 1.0)
    h = (120.0 * tolerance / (t_end * omega ** 5)) ** 0.25
    return min(h, 0.5 / omega)


@njit(cache=True)
def _rk4_shifted(pa, pb, pc, f1, f2, y, h, n_steps):  # pragma: no cover - jitted
    """Advance (A, B, C) by n_steps of RK4 on the shifted autonomous system."""
    a, b, c = y[0], y[1], y[2]
    for _ in range(n_steps):
        k1a = -1j * (pa * a + f1 * c)
        k1b = -1j * (pb * b + f2 * c)
        k1c = -1j * (pc * c + f1 * a + f2 * b)

        a2 = a + 0.5 * h * k1a
        b2 = b + 0.5 * h * k1b
        c2 = c + 0.5 * h * k1c
        k2a = -1j * (pa * a2 + f1 * c2)
        k2b = -1j * (pb * b2 + f2 * c2)
        k2c = -1j * (pc * c2 + f1 * a2 + f2 * b2)

        a3 = a + 0.5 * h * k2a
        b3 = b + 0.5 * h * k2b
        c3 = c + 0.5 * h * k2c
        k3a = -1j * (pa * a3 + f1 * c3)
        k3b = -1j * (pb * b3 + f2 * c3)
        k3c = -1j * (pc * c3 + f1 * a3 + f2 * b3)

        a4 = a + h * k3a
        b4 = b + h * k3b
        c4 = c + h * k3c
        k4a = -1j * (pa * a4 + f1 * c4)
        k4b = -1j * (pb * b4 + f2 * c4)
        k4c = -1j * (pc * c4 + f1 * a4 + f2 * b4)

        a = a + (h / 6.0) * (k1a + 2.0 * (k2a + k3a) + k4a)
        b = b + (h / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)
        c = c + (h / 6.0) * (k1c + 2.0 * (k2c + k3c) + k4c)
    y[0], y[1], y[2] = a, b, c


@njit(cache=True)
def _integrate_one(d_a, d_b, d_c, f1, f2, t_grid, step, out):  # pragma: no cover
    g = (d_a + d_b + d_c) / 3.0
    pa, pb, pc = d_a - g, d_b - g, d_c - g
    y = np.zeros(3, dtype=np.complex128)
    y[0] = 1.0
    out[0, 0] = 1.0
    out[0, 1] = 0.0
    out[0, 2] = 0.0
    for k in range(1, t_grid.shape[0]):
        span = t_grid[k] - t_grid[k - 1]
        n_sub = int(math.ceil(span / step))
        if n_sub < 1:
            n_sub = 1
        _rk4_shifted(pa, pb, pc, f1, f2, y, span / n_sub, n_sub)
        phase = np.exp(-1j * g * t_grid[k])
        out[k, 0] = phase * y[0]
        out[k, 1] = phase * y[1]
        out[k, 2] = phase * y[2]


@njit(cache=True, parallel=True)
def _integrate_batch(coeffs, t_grid, steps, out):  # pragma: no cover - jitted
    for s in prange(coeffs.shape[0]):
        _integrate_one(coeffs[s, 0], coeffs[s, 1], coeffs[s, 2],
                       coeffs[s, 3], coeffs[s, 4], t_grid, steps[s], out[s])


def integrate_sector(d_a: float, d_b: float, d_c: float, f1: float, f2: float,
                     config: IntegratorConfig) -> np.ndarray:
    """RK4 trajectory of one sector; shape (n_samples, 3), initial (1, 0, 0)."""
    t_grid = config.t_grid
    out = np.empty((t_grid.size, 3), dtype=np.complex128)
    _integrate_one(d_a, d_b, d_c, f1, f2, t_grid, config.step, out)
    drift = np.abs(np.sum(np.abs(out[-1]) ** 2) - 1.0)
    if drift > NORM_DRIFT_BOUND:
        raise StepSizeError(
            f"norm drift {drift:.3e} exceeds {NORM_DRIFT_BOUND}; reduce the step"
        )
    return out


def integrate_sectors(coeffs: np.ndarray, t_grid: np.ndarray,
                      steps: np.ndarray) -> np.ndarray:
    """Batch RK4 over sectors, parallel; coeffs rows are (d_a, d_b, d_c, f1, f2).

    Returns (n_sectors, n_samples, 3). Each sector writes its own output
    rows, so the result is independent of the thread count.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    steps = np.ascontiguousarray(steps, dtype=np.float64)
    out = np.empty((coeffs.shape[0], t_grid.size, 3), dtype=np.complex128)
    _integrate_batch(coeffs, t_grid, steps, out)
    drift = np.max(np.abs(np.sum(np.abs(out[:, -1, :]) ** 2, axis=1) - 1.0))
    if drift > NORM_DRIFT_BOUND:
        raise StepSizeError(
            f"worst norm drift {drift:.3e} exceeds {NORM_DRIFT_BOUND}"
        )
    return out


def integrate_bipartite_sector(sector, config: IntegratorConfig) -> np.ndarray:
    """Trajectory of (A_n, B_n, C_{n+1}) for a single-mode sector."""
    return integrate_sector(sector.V1, sector.V1, sector.V2,
                            sector.f1, sector.f2, config)


def integrate_tripartite_sector(sector, config: IntegratorConfig) -> np.ndarray:
    """Trajectory of (A_nm, B_nm, C_nm); the m = 0 case has f2 = 0 and B = 0."""
    return integrate_sector(sector.V11 + sector.V22, sector.V12 + sector.V21,
                            sector.V12 + sector.V22, sector.f1, sector.f2, config)


def kerr_evolution(state: FieldState, chi: float, t: float) -> FieldState:
    """Self-interaction phases q_n -> e^{-i chi n(n-1) t} q_n (exact)."""
    n = np.arange(state.cutoff + 1)
    phases = np.exp(-1j * chi * t * n * (n - 1))
    return FieldState(state.amplitudes * phases, state.cutoff, state.tail_mass)
