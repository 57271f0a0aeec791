"""Truncated Fock-basis field states: coherent and photon-added coherent.

Amplitudes are built by stable upward recurrences (no explicit factorials),
so cutoffs up to a few thousand photons are safe in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ResourceLimitError

DEFAULT_TAIL_TOL = 1e-10
CUTOFF_CEILING = 10_000


@dataclass(frozen=True)
class FieldState:
    """Pure field state q_n |n> for n = 0..cutoff.

    ``tail_mass`` is the probability excluded by the truncation, so
    sum |q_n|^2 + tail_mass = 1 for the ideal (untruncated) state.
    """

    amplitudes: np.ndarray
    cutoff: int
    tail_mass: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.cutoff < 0:
            raise InvalidInputError(f"cutoff must be >= 0, got {self.cutoff}")
        if amps.shape != (self.cutoff + 1,):
            raise InvalidInputError(
                f"amplitude vector length {amps.shape} does not match cutoff {self.cutoff}"
            )
        if not (0.0 <= self.tail_mass < 1.0):
            raise InvalidInputError(f"tail_mass out of range: {self.tail_mass}")

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.probabilities))

    def mean_photon_number(self) -> float:
        p = self.probabilities
        return float(np.dot(np.arange(p.size), p))


def overlap(a: FieldState, b: FieldState) -> complex:
    """Inner product <a|b> on the common truncated basis."""
    n = min(a.cutoff, b.cutoff) + 1
    return complex(np.vdot(a.amplitudes[:n], b.amplitudes[:n]))


def fidelity(a: FieldState, b: FieldState) -> float:
    """|<a|b>|^2."""
    return abs(overlap(a, b)) ** 2


def _check_alpha(alpha: complex) -> complex:
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise InvalidInputError(f"coherent amplitude must be finite, got {alpha}")
    return alpha


def _coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """q_n = e^{-|alpha|^2/2} alpha^n / sqrt(n!) via the ratio recurrence."""
    q = np.empty(cutoff + 1, dtype=complex)
    q[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(cutoff):
        q[n + 1] = q[n] * alpha / math.sqrt(n + 1)
    return q


def coherent_coefficients(alpha: complex, cutoff: int) -> FieldState:
    """Coherent state |alpha> truncated at ``cutoff`` photons."""
    alpha = _check_alpha(alpha)
    if cutoff < 0:
        raise InvalidInputError(f"cutoff must be >= 0, got {cutoff}")
    q = _coherent_amplitudes(alpha, cutoff)
    tail = max(0.0, 1.0 - float(np.sum(np.abs(q) ** 2)))
    return FieldState(q, cutoff, tail)


def laguerre(m: int, x: float) -> float:
    """Laguerre polynomial L_m(x) by upward recurrence.

    For x <= 0 every recurrence term is non-negative, so the evaluation
    is cancellation-free; that is the only regime used here.
    """
    if m == 0:
        return 1.0
    prev, cur = 1.0, 1.0 - x
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def pacs_coefficients(alpha: complex, m: int, cutoff: int) -> FieldState:
    """m-photon-added coherent state: normalized a^dag^m |alpha>.

    The exact normalization constant is m! L_m(-|alpha|^2), so the
    reported tail_mass refers to the untruncated state. For m = 0 the
    result coincides with ``coherent_coefficients``.
    """
    alpha = _check_alpha(alpha)
    if m < 0:
        raise InvalidInputError(f"photon-addition order must be >= 0, got {m}")
    if cutoff < m:
        raise InvalidInputError(f"cutoff {cutoff} smaller than photon additions m={m}")
    if m == 0:
        return coherent_coefficients(alpha, cutoff)

    cs = _coherent_amplitudes(alpha, cutoff - m)
    q = np.zeros(cutoff + 1, dtype=complex)
    # a^dag^m maps cs_k |k> to sqrt((k+m)!/k!) cs_k |k+m>; build the
    # factorial ratio square roots by recurrence.
    ratio = np.empty(cutoff - m + 1)
    ratio[0] = math.sqrt(math.factorial(m))
    for k in range(cutoff - m):
        ratio[k + 1] = ratio[k] * math.sqrt((k + 1 + m) / (k + 1))
    norm = math.sqrt(math.factorial(m) * laguerre(m, -abs(alpha) ** 2))
    q[m:] = ratio * cs / norm
    tail = max(0.0, 1.0 - float(np.sum(np.abs(q) ** 2)))
    return FieldState(q, cutoff, tail)


def auto_cutoff(alpha: complex, m: int = 0, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest cutoff whose truncation tail is below ``tail_tol``."""
    alpha = _check_alpha(alpha)
    if not (0.0 < tail_tol < 1.0):
        raise InvalidInputError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if m < 0:
        raise InvalidInputError(f"photon-addition order must be >= 0, got {m}")

    # Cumulative probability of the exact (untruncated) state, grown term
    # by term; identical arithmetic to pacs_coefficients/coherent.
    norm = math.factorial(m) * laguerre(m, -abs(alpha) ** 2) if m else 1.0
    cs_amp = math.exp(-0.5 * abs(alpha) ** 2)  # coherent q_0
    accum = 0.0
    k = 0  # coherent index; photon number is k + m
    while k + m <= CUTOFF_CEILING:
        if m:
            # |q_{k+m}|^2 = ((k+m)!/k!) |cs_k|^2 / norm
            term = abs(cs_amp) ** 2 / norm
            for j in range(k + 1, k + m + 1):
                term *= j
        else:
            term = abs(cs_amp) ** 2
        accum += term
        if 1.0 - accum < tail_tol:
            return k + m
        cs_amp *= abs(alpha) / math.sqrt(k + 1)
        k += 1
    raise ResourceLimitError(
        f"no cutoff below {CUTOFF_CEILING} reaches tail tolerance {tail_tol}"
    )
