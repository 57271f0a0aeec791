"""Characteristic frequencies and mode weights for the sector dynamics.

Every invariant subspace of the interaction dynamics reduces to a linear
system i d/dt (A, B, C) = M (A, B, C) with

    M = [[d_a, 0,   f1],
         [0,   d_b, f2],
         [f1,  f2,  d_c]]

and initial condition (1, 0, 0). Trial solutions ~ e^{i mu t} turn this
into a real cubic (both couplings active), a real quadratic (one
coupling), or a bare phase (no coupling). The cubic is solved in
depressed form after shifting out the mean diagonal, which keeps the
roots accurate even when the diagonal entries dwarf the couplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModesError, NumericDomainError

# arccos arguments within this distance of +-1 are clamped; anything
# farther out signals a cubic without three real roots.
ACOS_CLAMP_TOL = 1e-9

# roots closer than this (relative to the largest root) make the
# partial-fraction weights unreliable; callers fall back to integration.
DEGENERACY_RTOL = 1e-8


@dataclass(frozen=True)
class CubicModes:
    """Three real characteristic frequencies and their B-amplitude weights."""

    mu: np.ndarray
    b: np.ndarray
    degenerate_flag: bool = False


@dataclass(frozen=True)
class QuadraticModes:
    """Two real characteristic frequencies and the A-amplitude weights."""

    alpha_roots: np.ndarray
    c: np.ndarray


def depressed_cubic_roots(p: float, q: float, scale: float = 1.0) -> np.ndarray:
    """Three real roots of s^3 + p s + q = 0, ascending.

    ``scale`` sets the size below which p and q count as zero (triple
    root). Requires p < 0 away from that limit: the trigonometric form
    only covers cubics with three real roots.
    """
    tiny = (1e-14 * scale) ** 2
    if abs(p) < tiny and abs(q) < tiny ** 1.5 or (p == 0.0 and q == 0.0):
        return np.zeros(3)
    if p >= 0.0:
        raise NumericDomainError(
            f"cubic with p={p} >= 0 does not have three real roots"
        )
    amp = 2.0 * math.sqrt(-p / 3.0)
    arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
    if abs(arg) > 1.0:
        if abs(arg) > 1.0 + ACOS_CLAMP_TOL:
            raise NumericDomainError(
                f"arccos argument {arg} outside [-1, 1]: complex root pair"
            )
        arg = math.copysign(1.0, arg)
    theta = math.acos(arg) / 3.0
    roots = amp * np.cos(theta + (2.0 * np.pi / 3.0) * np.arange(3))
    roots.sort()
    return roots


def solve_cubic_trig(x1: float, x2: float, x3: float) -> np.ndarray:
    """Three real roots of mu^3 + x1 mu^2 + x2 mu + x3 = 0, ascending.

    Degenerate case x1^2 - 3 x2 ~ 0 returns the triple root -x1/3.
    """
    if not all(math.isfinite(v) for v in (x1, x2, x3)):
        raise NumericDomainError(f"non-finite cubic coefficients ({x1}, {x2}, {x3})")
    shift = x1 / 3.0
    p = x2 - x1 * shift
    q = 2.0 * shift ** 3 - shift * x2 + x3
    scale = max(1.0, abs(x1), math.sqrt(abs(x2)), abs(x3) ** (1.0 / 3.0))
    return depressed_cubic_roots(p, q, scale=scale) - shift


def mode_weights(f1: float, f2: float, mu: np.ndarray) -> np.ndarray:
    """Partial-fraction weights b_j = f1 f2 / prod_{k != j} (mu_j - mu_k).

    Requires f2 != 0 and pairwise distinct roots; near-coincident roots
    raise DegenerateModesError so the caller can integrate numerically.
    """
    if f2 == 0.0:
        raise NumericDomainError("mode weights need f2 != 0; use the decoupled path")
    mu = np.asarray(mu, dtype=float)
    gaps = np.array([
        (mu[0] - mu[1]) * (mu[0] - mu[2]),
        (mu[1] - mu[0]) * (mu[1] - mu[2]),
        (mu[2] - mu[0]) * (mu[2] - mu[1]),
    ])
    min_gap = min(abs(mu[0] - mu[1]), abs(mu[0] - mu[2]), abs(mu[1] - mu[2]))
    if min_gap <= DEGENERACY_RTOL * np.max(np.abs(mu)):
        raise DegenerateModesError(
            f"characteristic roots too close (min gap {min_gap}); "
            "evolve this sector with the integrator"
        )
    return f1 * f2 / gaps


def solve_quadratic(y1: float, y2: float) -> np.ndarray:
    """Two real roots of alpha^2 + y1 alpha + y2 = 0, ascending."""
    disc = y1 * y1 - 4.0 * y2
    if disc < 0.0:
        if disc < -ACOS_CLAMP_TOL * max(1.0, y1 * y1, abs(y2)):
            raise NumericDomainError(f"negative discriminant {disc}")
        disc = 0.0
    root = math.sqrt(disc)
    if y1 >= 0.0:
        r1 = (-y1 - root) / 2.0
    else:
        r1 = (-y1 + root) / 2.0
    # companion root via the product to avoid cancellation
    r2 = y2 / r1 if r1 != 0.0 else -y1 - r1
    lo, hi = (r1, r2) if r1 <= r2 else (r2, r1)
    return np.array([lo, hi])


def quadratic_modes(d_a: float, d_c: float, f: float) -> QuadraticModes:
    """Modes of the two-level system i dA/dt = d_a A + f C, i dC/dt = d_c C + f A.

    Weights satisfy c1 + c2 = 1 exactly (A(0) = 1). Evaluated in shifted
    variables so large common diagonals do not erode precision.
    """
    if f == 0.0:
        raise NumericDomainError("quadratic modes need f != 0; use the phase path")
    half = 0.5 * (d_a + d_c)
    hd = 0.5 * (d_a - d_c)
    disc = math.hypot(hd, f)
    alpha = np.array([-half - disc, -half + disc])
    # d_a + alpha_j = hd -+ disc, rewritten to avoid cancellation
    if hd >= 0.0:
        da_p2 = hd + disc
        da_p1 = -f * f / da_p2
    else:
        da_p1 = hd - disc
        da_p2 = f * f / (disc - hd)
    c1 = da_p2 / (2.0 * disc)
    c2 = -da_p1 / (2.0 * disc)
    return QuadraticModes(alpha, np.array([c1, c2]))


KIND_CUBIC = "cubic"
KIND_QUADRATIC = "quadratic"
KIND_PHASE = "phase"


@dataclass(frozen=True)
class SectorModes:
    """Closed-form sector solution: (A, B, C)(t) = sum_j coef * e^{i mu_j t}.

    Unused mode slots are zero-padded so every sector exposes three
    frequencies; all coefficients are real for these Hamiltonians.
    """

    kind: str
    mu: np.ndarray
    coef_a: np.ndarray
    coef_b: np.ndarray
    coef_c: np.ndarray

    def amplitudes(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A, B, C) at scalar or array ``t``."""
        phase = np.exp(1j * np.multiply.outer(np.asarray(t, dtype=float), self.mu))
        return (phase @ self.coef_a, phase @ self.coef_b, phase @ self.coef_c)


def sector_modes(d_a: float, d_b: float, d_c: float, f1: float, f2: float) -> SectorModes:
    """Closed-form solution of the generic sector with A(0) = 1, B(0) = C(0) = 0.

    Raises DegenerateModesError when the cubic roots nearly coincide.
    """
    zeros = np.zeros(3)
    if f1 == 0.0:
        # A evolves as a bare phase; B and C start at zero and stay there.
        mu = np.array([-d_a, 0.0, 0.0])
        return SectorModes(KIND_PHASE, mu, np.array([1.0, 0.0, 0.0]), zeros, zeros)
    if f2 == 0.0:
        qm = quadratic_modes(d_a, d_c, f1)
        mu = np.array([qm.alpha_roots[0], qm.alpha_roots[1], 0.0])
        coef_a = np.array([qm.c[0], qm.c[1], 0.0])
        coef_c = np.array([
            -qm.c[0] * (qm.alpha_roots[0] + d_a) / f1,
            -qm.c[1] * (qm.alpha_roots[1] + d_a) / f1,
            0.0,
        ])
        return SectorModes(KIND_QUADRATIC, mu, coef_a, zeros, coef_c)

    # Full three-mode sector: depress the cubic around the mean diagonal.
    # Worked in extended precision because nearly coincident roots (large
    # Kerr phases, weak coupling) amplify coefficient rounding into the
    # mode weights; the downcast at the end returns clean float64 data.
    ld = np.longdouble
    da, db, dc = ld(d_a), ld(d_b), ld(d_c)
    g1, g2 = ld(f1), ld(f2)
    g = (da + db + dc) / 3
    pa, pb, pc = da - g, db - g, dc - g
    p = pa * pb + pb * pc + pc * pa - g1 * g1 - g2 * g2
    q = pa * pb * pc - g2 * g2 * pa - g1 * g1 * pb
    scale = float(max(abs(pa), abs(pb), abs(pc), abs(g1), abs(g2), 1e-300))
    s = _depressed_roots_ld(p, q, scale)
    mu_ld = s - g
    mu = np.asarray(mu_ld, dtype=float)
    _ = mode_weights(f1, f2, mu)  # degeneracy guard on the float64 roots
    gaps = np.array([
        (mu_ld[0] - mu_ld[1]) * (mu_ld[0] - mu_ld[2]),
        (mu_ld[1] - mu_ld[0]) * (mu_ld[1] - mu_ld[2]),
        (mu_ld[2] - mu_ld[0]) * (mu_ld[2] - mu_ld[1]),
    ], dtype=ld)
    b_ld = g1 * g2 / gaps
    coef_a = np.asarray(b_ld * ((mu_ld + db) * (mu_ld + dc) - g2 * g2) / (g1 * g2),
                        dtype=float)
    coef_c = np.asarray(-b_ld * (mu_ld + db) / g2, dtype=float)
    return SectorModes(KIND_CUBIC, mu, coef_a, np.asarray(b_ld, dtype=float), coef_c)


def _depressed_roots_ld(p, q, scale: float) -> np.ndarray:
    """Extended-precision counterpart of depressed_cubic_roots."""
    ld = np.longdouble
    tiny = ld((1e-14 * scale) ** 2)
    if (abs(p) < tiny and abs(q) < tiny ** ld(1.5)) or (p == 0 and q == 0):
        return np.zeros(3, dtype=ld)
    if p >= 0:
        raise NumericDomainError(
            f"cubic with p={float(p)} >= 0 does not have three real roots"
        )
    amp = 2 * np.sqrt(-p / 3)
    arg = (3 * q / (2 * p)) * np.sqrt(ld(-3) / p)
    if abs(arg) > 1:
        if abs(arg) > 1 + ld(ACOS_CLAMP_TOL):
            raise NumericDomainError(
                f"arccos argument {float(arg)} outside [-1, 1]: complex root pair"
            )
        arg = ld(1) if arg > 0 else ld(-1)
    theta = np.arccos(arg) / 3
    roots = amp * np.cos(theta + (2 * np.pi / 3) * np.arange(3, dtype=ld))
    roots.sort()
    return roots
