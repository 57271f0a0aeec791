"""Entanglement entropy, photon statistics, and observable time series."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InvalidInputError,
    PositivityError,
    ResourceLimitError,
    UndefinedObservableError,
)

HERMITICITY_TOL = 1e-12
POSITIVITY_TOL = 1e-8
EIGENVALUE_FLOOR = 1e-14
MEAN_PHOTON_FLOOR = 1e-12

# hard ceiling on series length; paper-scale runs use 1e7 points
SERIES_POINT_CEILING = 50_000_000


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Hermitian, (nearly) unit-trace state of one subsystem."""

    matrix: np.ndarray
    dimension: int
    trace_defect: float

    @classmethod
    def from_matrix(cls, matrix: np.ndarray,
                    expected_trace: float = 1.0) -> "ReducedDensityMatrix":
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidInputError(f"density matrix must be square, got {matrix.shape}")
        scale = max(1.0, float(np.max(np.abs(matrix))))
        asym = float(np.max(np.abs(matrix - matrix.conj().T)))
        if asym > HERMITICITY_TOL * scale:
            raise InvalidInputError(f"matrix not Hermitian (defect {asym:.2e})")
        trace = float(np.trace(matrix).real)
        if abs(trace - expected_trace) > 1e-8:
            raise InvalidInputError(
                f"trace {trace} differs from expected {expected_trace}"
            )
        matrix.setflags(write=False)
        return cls(matrix, matrix.shape[0], abs(1.0 - trace))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diagonal(self.matrix)).copy()

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def entropy_from_eigenvalues(evals: np.ndarray) -> np.ndarray:
    """Base-2 entropy over the trailing axis; values below 1e-14 count as 0."""
    evals = np.asarray(evals)
    if float(np.min(evals)) < -POSITIVITY_TOL:
        raise PositivityError(
            f"eigenvalue {float(np.min(evals)):.3e} below -{POSITIVITY_TOL}"
        )
    p = np.where(evals > EIGENVALUE_FLOOR, evals, 1.0)
    return -np.sum(np.log2(p) * np.where(evals > EIGENVALUE_FLOOR, evals, 0.0),
                   axis=-1)


def svne(rho: ReducedDensityMatrix) -> float:
    """Von Neumann entropy -Tr(rho log2 rho) in bits."""
    return float(entropy_from_eigenvalues(rho.eigenvalues()))


def mean_photon_number(rho: ReducedDensityMatrix) -> float:
    """First moment of the photon-number distribution on the diagonal."""
    p = rho.diagonal()
    return float(p @ np.arange(p.size))


def mandel_q(rho: ReducedDensityMatrix) -> float:
    """(variance - mean)/mean of photon number; negative is sub-Poissonian.

    Only the diagonal enters: number-operator moments are insensitive to
    coherences.
    """
    p = rho.diagonal()
    n = np.arange(p.size)
    m1 = float(p @ n)
    if m1 < MEAN_PHOTON_FLOOR:
        raise UndefinedObservableError("Mandel Q undefined for (near-)vacuum state")
    m2 = float(p @ (n.astype(float) ** 2))
    return (m2 - m1 * m1) / m1 - 1.0


@dataclass(frozen=True)
class ObservableSeries:
    """Uniformly sampled scalar trajectory."""

    values: np.ndarray
    dt: float
    label: str
    origin: str = ""
    t0: float = 0.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidInputError("series values must be one-dimensional")
        if values.size and not np.all(np.isfinite(values)):
            raise InvalidInputError("series contains non-finite values")
        if self.dt <= 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def rescaled(self, factor: float) -> "ObservableSeries":
        return replace(self, values=self.values * factor)


def series(evolution, which: str, dt: float, n_times: int,
           t0: float = 0.0, label: str | None = None,
           allow_partial: bool = False) -> ObservableSeries:
    """Sample one observable of a prepared evolution on a uniform grid.

    ``evolution`` is a BipartiteEvolution or TripartiteEvolution; ``which``
    is one of its observable names (mean_photon, svne, mandel_q). Output is
    deterministic for a given grid regardless of internal chunking.
    """
    if n_times < 1:
        raise InvalidInputError("series needs at least one point")
    if n_times > SERIES_POINT_CEILING:
        if not allow_partial:
            raise ResourceLimitError(
                f"{n_times} points exceeds ceiling {SERIES_POINT_CEILING}; "
                "pass allow_partial=True for a truncated series"
            )
        n_times = SERIES_POINT_CEILING
    values = evolution.series_values(which, t0, dt, n_times)
    return ObservableSeries(values, dt, label or which, origin=evolution.describe(),
                            t0=t0)
