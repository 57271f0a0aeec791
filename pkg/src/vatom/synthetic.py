"""Seeded synthetic series for calibrating the time-series analyses."""

from __future__ import annotations

import numpy as np

from .observables import ObservableSeries


def logistic_series(n_points: int, x0: float = 0.3141592653589793,
                    r: float = 4.0, dt: float = 1.0) -> ObservableSeries:
    """Iterates of the logistic map x -> r x (1 - x)."""
    x = np.empty(n_points)
    x[0] = x0
    for k in range(n_points - 1):
        x[k + 1] = r * x[k] * (1.0 - x[k])
    return ObservableSeries(x, dt=dt, label="logistic", origin=f"logistic r={r} x0={x0}")


def sinusoid_series(n_points: int, period: float = 37.7, amplitude: float = 1.0,
                    phase: float = 0.0, noise: float = 0.0, seed: int = 0,
                    dt: float = 1.0) -> ObservableSeries:
    """Sampled sinusoid, optionally with additive Gaussian noise of rms ``noise``."""
    t = np.arange(n_points)
    x = amplitude * np.sin(2.0 * np.pi * t / period + phase)
    if noise > 0.0:
        x = x + np.random.default_rng(seed).normal(scale=noise, size=n_points)
    return ObservableSeries(x, dt=dt, label="sinusoid",
                            origin=f"sinusoid period={period} noise={noise} seed={seed}")


def iid_uniform_series(n_points: int, seed: int = 0, dt: float = 1.0) -> ObservableSeries:
    """Independent uniform samples on [0, 1): the reference ergodic control."""
    x = np.random.default_rng(seed).random(n_points)
    return ObservableSeries(x, dt=dt, label="iid_uniform", origin=f"iid seed={seed}")
