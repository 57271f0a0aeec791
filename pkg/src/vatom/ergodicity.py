"""Recurrence statistics, embedding dimension, and Lyapunov estimation.

The phase interval of a scalar observable is coarse-grained into equal
cells; recurrences to a cell are counted between visit blocks (a return
requires leaving the cell first, and the return time is measured from the
last sample of one block to the first sample of the next, in units of the
sampling step). With that convention an independent process with cell
measure p has geometric return times of mean 1/p, and the k-th return
time is the exact k-fold convolution of the first-return distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import chi2 as chi2_dist

from .errors import InsufficientDataError, InvalidInputError
from .observables import ObservableSeries

FNN_NEGLIGIBLE = 1e-5


@dataclass(frozen=True)
class CellSequence:
    """Cell index per sample plus the empirical occupation measures."""

    indices: np.ndarray
    n_cells: int
    cell_edges: np.ndarray
    measures: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class RecurrenceStats:
    """Histogram of return times (in sampling steps) to one cell."""

    return_times: np.ndarray
    counts: np.ndarray
    mean_return: float
    sample_count: int

    def probabilities(self) -> np.ndarray:
        return self.counts / self.sample_count

    def pmf(self, length: int | None = None) -> np.ndarray:
        """Dense probability vector indexed by return time."""
        n = int(self.return_times[-1]) + 1 if length is None else length
        out = np.zeros(n)
        keep = self.return_times < n
        out[self.return_times[keep]] = self.counts[keep] / self.sample_count
        return out


@dataclass(frozen=True)
class EmbeddingReport:
    """False-nearest-neighbour fractions per candidate dimension."""

    dimensions: np.ndarray
    fnn_fraction: np.ndarray
    d_min: int | None
    delay: int
    r_tol: float
    a_tol: float
    theiler: int
    saturated: bool


@dataclass(frozen=True)
class LyapunovReport:
    """Average log-divergence curve and the slope of its linear region."""

    k_values: np.ndarray
    divergence_curve: np.ndarray
    fit_range: tuple[int, int]
    slope: float
    slope_per_time: float
    dim: int
    delay: int
    theiler: int


@dataclass(frozen=True)
class KacFit:
    """Mean recurrence time against reciprocal measure, with a linear fit."""

    inverse_measures: np.ndarray
    mean_returns: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    dropped_cells: int


# -- coarse graining and recurrences -----------------------------------------


def coarse_grain(series: ObservableSeries, n_cells: int) -> CellSequence:
    """Partition [min, max] of the series into equal cells and label samples."""
    if n_cells < 2:
        raise InvalidInputError(f"need at least 2 cells, got {n_cells}")
    x = series.values
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        return CellSequence(np.zeros(x.size, dtype=np.int64), 1,
                            np.array([lo, lo]), np.array([1.0]), degenerate=True)
    idx = np.floor((x - lo) * (n_cells / (hi - lo))).astype(np.int64)
    np.clip(idx, 0, n_cells - 1, out=idx)
    measures = np.bincount(idx, minlength=n_cells) / x.size
    edges = np.linspace(lo, hi, n_cells + 1)
    return CellSequence(idx, n_cells, edges, measures)


def _visit_gaps(cells: CellSequence, target_cell: int) -> np.ndarray:
    """Return times between visit blocks: last in-cell sample to next entry."""
    inside = cells.indices == target_cell
    if not inside.any():
        raise InsufficientDataError(f"cell {target_cell} never visited")
    d = np.diff(inside.astype(np.int8))
    starts = np.flatnonzero(d == 1) + 1
    ends = np.flatnonzero(d == -1)
    if inside[0]:
        starts = np.concatenate(([0], starts))
    if inside[-1]:
        ends = np.concatenate((ends, [inside.size - 1]))
    if starts.size < 2:
        raise InsufficientDataError(
            f"cell {target_cell} visited only {starts.size} time(s); "
            "need at least two visits"
        )
    return starts[1:] - ends[:-1]


def first_return_distribution(cells: CellSequence, target_cell: int) -> RecurrenceStats:
    """Distribution phi_1 of the first-return time to one cell."""
    gaps = _visit_gaps(cells, target_cell)
    times, counts = np.unique(gaps, return_counts=True)
    return RecurrenceStats(times.astype(np.int64), counts,
                           float(np.mean(gaps)), int(gaps.size))


def kth_return_distribution(cells: CellSequence, target_cell: int,
                            k: int) -> RecurrenceStats:
    """Distribution phi_k of the time to the k-th return.

    Sums k consecutive first-return gaps over disjoint windows, so the
    samples stay independent under the uncorrelated-returns model and
    phi_k is exactly the k-fold convolution of phi_1 for such a process.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    gaps = _visit_gaps(cells, target_cell)
    n_win = gaps.size // k
    if n_win < 1:
        raise InsufficientDataError(
            f"only {gaps.size} returns observed; need at least {k}"
        )
    sums = gaps[:n_win * k].reshape(n_win, k).sum(axis=1)
    times, counts = np.unique(sums, return_counts=True)
    return RecurrenceStats(times.astype(np.int64), counts,
                           float(np.mean(sums)), int(sums.size))


def most_visited_interior_cell(cells: CellSequence) -> int:
    """Default target: the busiest cell away from the partition edges."""
    if cells.n_cells <= 2:
        return int(np.argmax(cells.measures))
    interior = cells.measures[1:-1]
    if interior.max() == 0.0:
        return int(np.argmax(cells.measures))
    return int(np.argmax(interior)) + 1


def mean_recurrence_vs_measure(series: ObservableSeries,
                               cell_counts,
                               target_cell: int | None = None,
                               min_returns: int = 10) -> KacFit:
    """Kac's-lemma check: mean return time against reciprocal cell measure.

    One point per partition size; cells with fewer than ``min_returns``
    observed returns are dropped (and counted in ``dropped_cells``).
    """
    cell_counts = list(cell_counts)
    if len(cell_counts) < 4:
        raise InvalidInputError("need at least 4 partition sizes")
    inv_measure, mean_ret, dropped = [], [], 0
    for n_cells in cell_counts:
        cells = coarse_grain(series, n_cells)
        if cells.degenerate:
            dropped += 1
            continue
        tgt = most_visited_interior_cell(cells) if target_cell is None else target_cell
        try:
            stats = first_return_distribution(cells, tgt)
        except InsufficientDataError:
            dropped += 1
            continue
        if stats.sample_count < min_returns:
            dropped += 1
            continue
        inv_measure.append(1.0 / cells.measures[tgt])
        mean_ret.append(stats.mean_return)
    if len(inv_measure) < 4:
        raise InsufficientDataError(
            f"only {len(inv_measure)} usable partitions after dropping {dropped}"
        )
    x = np.array(inv_measure)
    y = np.array(mean_ret)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return KacFit(x, y, float(slope), float(intercept), r2, dropped)


def poisson_return_consistency(cells: CellSequence, target_cell: int,
                               k: int, min_expected: float = 5.0):
    """Chi-square p-value of phi_k against the uncorrelated-returns model.

    The model distribution is the k-fold convolution of the empirical
    phi_1; adjacent bins are merged until every expected count reaches
    ``min_expected``.
    """
    phi1 = first_return_distribution(cells, target_cell)
    obs = kth_return_distribution(cells, target_cell, k)
    base = phi1.pmf()
    model = base.copy()
    for _ in range(k - 1):
        model = np.convolve(model, base)
    observed = np.zeros(model.size)
    inside = obs.return_times < model.size
    observed[obs.return_times[inside]] = obs.counts[inside]
    # any observed mass beyond the model support joins the last bin
    observed[-1] += obs.counts[~inside].sum()
    expected = model * obs.sample_count

    merged_obs, merged_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            merged_obs.append(acc_o)
            merged_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and merged_exp:
        merged_obs[-1] += acc_o
        merged_exp[-1] += acc_e
    if len(merged_exp) < 2:
        raise InsufficientDataError("too few populated bins for a chi-square test")
    o = np.array(merged_obs)
    e = np.array(merged_exp)
    e *= o.sum() / e.sum()
    stat = float(np.sum((o - e) ** 2 / e))
    dof = len(e) - 1
    return stat, dof, float(chi2_dist.sf(stat, dof))


# -- distribution shape summaries ---------------------------------------------


def top_bin_mass(stats: RecurrenceStats, n_top: int = 5) -> float:
    """Fraction of returns concentrated in the n_top most common return times."""
    counts = np.sort(stats.counts)[::-1]
    return float(counts[:n_top].sum() / stats.sample_count)


def exponential_tail_fit(stats: RecurrenceStats, n_bins: int = 25):
    """Log-linear fit of the binned return-time histogram.

    Returns (decay rate per step, R^2 of the fit); bins without counts
    are excluded.
    """
    t = stats.return_times.astype(float)
    edges = np.linspace(t.min(), t.max() + 1.0, n_bins + 1)
    which = np.clip(np.digitize(t, edges) - 1, 0, n_bins - 1)
    binned = np.zeros(n_bins)
    np.add.at(binned, which, stats.counts.astype(float))
    centers = 0.5 * (edges[:-1] + edges[1:])
    keep = binned > 0
    if keep.sum() < 3:
        raise InsufficientDataError("fewer than 3 populated bins")
    x, y = centers[keep], np.log(binned[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2


# -- return maps and delay embeddings -----------------------------------------


def return_map(series: ObservableSeries, lag: int = 1) -> np.ndarray:
    """Pairs (s(tau), s(tau + lag)) in time order; shape (N - lag, 2)."""
    if lag < 1:
        raise InvalidInputError(f"lag must be >= 1, got {lag}")
    x = series.values
    if x.size <= lag:
        raise InsufficientDataError("series shorter than the lag")
    return np.column_stack((x[:-lag], x[lag:]))


def delay_embedding(x: np.ndarray, dim: int, delay: int) -> np.ndarray:
    """Delay vectors (s_i, s_{i+tau}, ..., s_{i+(dim-1)tau}) as rows."""
    n = x.size - (dim - 1) * delay
    if n < 1:
        raise InsufficientDataError(
            f"series of {x.size} points too short for dim {dim}, delay {delay}"
        )
    return np.lib.stride_tricks.sliding_window_view(
        x, (dim - 1) * delay + 1)[:, ::delay]


def autocorrelation_delay(series: ObservableSeries, max_lag: int | None = None) -> int:
    """First minimum of the autocorrelation function (fallback: first zero)."""
    x = series.values - np.mean(series.values)
    n = x.size
    if max_lag is None:
        max_lag = max(2, n // 10)
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:max_lag + 1]
    if acf[0] <= 0:
        return 1
    acf = acf / acf[0]
    for lag in range(1, max_lag):
        if acf[lag] < acf[lag - 1] and acf[lag] <= acf[lag + 1]:
            return lag
        if acf[lag] <= 0.0:
            return lag
    return max(1, max_lag // 2)


def mean_period(series: ObservableSeries) -> int:
    """Period (in steps) of the dominant spectral peak, at least 1."""
    x = series.values - np.mean(series.values)
    spec = np.abs(np.fft.rfft(x))
    if spec.size < 2:
        return 1
    k = 1 + int(np.argmax(spec[1:]))
    return max(1, int(round(x.size / k)))


def _nearest_excluding(tree: cKDTree, points: np.ndarray, point_indices: np.ndarray,
                       theiler: int, valid_max: int | None = None):
    """Nearest neighbour of each query point outside its Theiler window.

    ``point_indices`` holds the absolute (temporal) index of every query
    row, used for the exclusion test. ``valid_max`` restricts admissible
    neighbour indices. Returns (distances, indices); index -1 marks rows
    with no admissible neighbour.
    """
    n = points.shape[0]
    total = tree.n
    nn_idx = np.full(n, -1, dtype=np.int64)
    nn_dist = np.full(n, np.inf)
    unresolved = np.arange(n)
    k = max(2, 2 * theiler + 2)
    while unresolved.size:
        k = min(k, total)
        dist, idx = tree.query(points[unresolved], k=k, workers=1)
        ref = unresolved
        admissible = np.abs(idx - point_indices[ref][:, None]) > theiler
        if valid_max is not None:
            admissible &= idx <= valid_max
        admissible &= np.isfinite(dist)
        first = np.argmax(admissible, axis=1)
        found = admissible[np.arange(ref.size), first]
        rows = ref[found]
        nn_idx[rows] = idx[found, first[found]]
        nn_dist[rows] = dist[found, first[found]]
        unresolved = ref[~found]
        if k == total:
            break
        k *= 2
    return nn_dist, nn_idx


def fnn_embedding_dimension(series: ObservableSeries, delay: int | None = None,
                            d_max: int = 10, r_tol: float = 10.0,
                            a_tol: float = 2.0, theiler: int | None = None,
                            threshold: float = FNN_NEGLIGIBLE,
                            max_refs: int | None = None,
                            noise_scale: float = 0.0) -> EmbeddingReport:
    """Minimum embedding dimension by the false-nearest-neighbour criteria.

    A neighbour pair at dimension d is false when the extra coordinate at
    d+1 either jumps by more than r_tol times the pair distance or pushes
    the pair distance beyond a_tol times the attractor size. d_min is the
    first dimension whose false fraction drops below ``threshold``.

    ``noise_scale``, when positive, floors the ratio-test denominator:
    measurement noise packs neighbours closer than its own amplitude, and
    distance ratios inside that ball carry no geometric signal.
    """
    x = series.values
    if delay is None:
        delay = autocorrelation_delay(series)
    if theiler is None:
        theiler = delay
    attractor_size = float(np.std(x))
    if attractor_size == 0.0:
        raise InsufficientDataError("constant series has no geometry to embed")
    if x.size - d_max * delay < max(theiler + 2, 10):
        raise InsufficientDataError(
            f"{x.size} points cannot support dimension {d_max} at delay {delay}"
        )

    dims = np.arange(1, d_max + 1)
    fractions = np.empty(d_max)
    d_min = None
    for d in dims:
        emb = delay_embedding(x, d, delay)
        usable = x.size - d * delay  # rows with a (d+1)-th coordinate
        if usable < max(theiler + 2, 10):
            raise InsufficientDataError(
                f"series too short to test dimension {d} at delay {delay}"
            )
        pts = emb[:usable]
        if max_refs is not None and usable > max_refs:
            stride = int(np.ceil(usable / max_refs))
            refs = np.arange(0, usable, stride)
        else:
            refs = np.arange(usable)
        tree = cKDTree(emb)
        dist, idx = _nearest_excluding(tree, pts[refs], refs, theiler,
                                       valid_max=usable - 1)
        # map query rows back to absolute reference indices
        ok = idx >= 0
        ref_ok = refs[ok]
        nb_ok = idx[ok]
        if ref_ok.size == 0:
            raise InsufficientDataError("no admissible neighbour pairs")
        extra = np.abs(x[ref_ok + d * delay] - x[nb_ok + d * delay])
        base = np.maximum(dist[ok], noise_scale)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_false = np.where(base > 0, extra > r_tol * base, extra > 0)
        lonely_false = np.sqrt(base ** 2 + extra ** 2) > a_tol * attractor_size
        false = ratio_false | lonely_false
        fractions[d - 1] = false.sum() / false.size
        if d_min is None and fractions[d - 1] < threshold:
            d_min = int(d)
            fractions[d:] = fractions[d - 1]
            break
    else:
        pass
    if d_min is not None:
        dims = dims[:d_min]
        fractions = fractions[:d_min]
    return EmbeddingReport(dims, fractions[:dims.size], d_min, delay,
                           r_tol, a_tol, theiler, saturated=d_min is None)


def rosenstein_mle(series: ObservableSeries, dim: int, delay: int = 1,
                   theiler: int | None = None, k_max: int = 100,
                   fit_range: tuple[int, int] | None = None,
                   max_refs: int | None = None) -> LyapunovReport:
    """Maximal Lyapunov exponent from nearest-neighbour divergence.

    Every delay vector is paired with its nearest neighbour outside the
    Theiler window; the slope of the averaged log-separation over the
    linear region estimates the exponent (per step, and per unit time
    through the sampling step of the series).
    """
    x = series.values
    if theiler is None:
        theiler = mean_period(series)
    emb = delay_embedding(x, dim, delay)
    m = emb.shape[0]
    follow_max = m - 1 - k_max
    if follow_max <= theiler + 1:
        raise InsufficientDataError(
            f"{m} delay vectors cannot support k_max {k_max} with theiler {theiler}"
        )
    if max_refs is not None and follow_max > max_refs:
        stride = int(np.ceil(follow_max / max_refs))
        refs = np.arange(0, follow_max, stride)
    else:
        refs = np.arange(follow_max)
    tree = cKDTree(emb)
    _, nb = _nearest_excluding(tree, emb[refs], refs, theiler,
                               valid_max=follow_max - 1)
    ok = nb >= 0
    refs, nb = refs[ok], nb[ok]
    if refs.size == 0:
        raise InsufficientDataError("no admissible neighbour pairs")

    k_values = np.arange(k_max + 1)
    curve = np.empty(k_max + 1)
    for k in k_values:
        sep = emb[refs + k] - emb[nb + k]
        d = np.sqrt(np.einsum("ij,ij->i", sep, sep))
        pos = d > 0
        curve[k] = np.mean(np.log(d[pos])) if pos.any() else -np.inf
    finite = np.isfinite(curve)
    if not finite.all():
        # zero-distance pairs at some k; fall back to the finite region
        last = int(np.argmax(~finite))
        k_values, curve = k_values[:last], curve[:last]
        if k_values.size < 5:
            raise InsufficientDataError("divergence curve collapsed to zero")

    lo, hi = _linear_region(curve) if fit_range is None else fit_range
    lo = max(0, int(lo))
    hi = min(k_values.size - 1, int(hi))
    if hi - lo < 2:
        raise InvalidInputError(f"fit range ({lo}, {hi}) too narrow")
    slope = float(np.polyfit(k_values[lo:hi + 1], curve[lo:hi + 1], 1)[0])
    return LyapunovReport(k_values, curve, (lo, hi), slope, slope / series.dt,
                          dim, delay, theiler)


def _linear_region(curve: np.ndarray, min_len: int = 5,
                   slope_var: float = 0.2) -> tuple[int, int]:
    """Fit window between the initial transient and the saturation plateau.

    Curves without a substantial net rise (less than one e-fold: regular
    motion, where the log-separation merely oscillates) are fitted over
    the whole range. Otherwise the saturation point is where the curve
    first comes within 5% (of its total rise) of the final level; inside
    the pre-saturation span, the longest window whose local slope varies
    by less than ``slope_var`` of its median is selected.
    """
    n = curve.size
    rise = float(curve.max() - curve[0])
    if rise <= 1.0:
        return 0, n - 1
    level = curve.max() - 0.05 * rise
    k_sat = int(np.argmax(curve >= level))
    if k_sat < min_len + 1:
        return 0, n - 1
    slopes = np.diff(curve[:k_sat + 1])
    if slopes.size <= min_len:
        return 0, k_sat
    best = (0, k_sat)
    best_len = 0
    for length in range(slopes.size, min_len - 1, -1):
        if length <= best_len:
            break
        for start in range(0, slopes.size - length + 1):
            window = slopes[start:start + length]
            med = float(np.median(window))
            tol = slope_var * max(abs(med), 1e-3 * abs(rise) / n)
            if np.max(np.abs(window - med)) <= tol:
                best = (start, start + length)
                best_len = length
                break
        if best_len:
            break
    return best
