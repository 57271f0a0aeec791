"""Experiment orchestration: config -> series -> analyses -> files.

A run is described by one TOML file (see presets/ for examples). The
same seeded config always produces byte-identical data files, whatever
the thread count; timing information lives only in the manifest.
"""

from __future__ import annotations

import hashlib
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, ergodicity, seriesio, synthetic
from .bipartite import BipartiteEvolution, BipartiteParams
from .errors import InvalidInputError
from .field_states import FieldState, auto_cutoff, coherent_coefficients, pacs_coefficients
from .observables import ObservableSeries, series as make_series
from .tripartite import TripartiteEvolution, TripartiteParams

DEFAULT_TAIL_TOL = 1e-10
MODELS = ("bipartite", "tripartite", "kerr")
ANALYSES = ("first_return", "kth_return", "poisson_consistency", "kac",
            "iid_control_kac", "return_map", "fnn", "rosenstein")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run description parsed from TOML."""

    name: str
    model: str
    seed: int
    params: dict
    initial: dict
    grid: dict
    observables: tuple[str, ...]
    analyses: tuple[dict, ...] = ()
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        exp = data.get("experiment")
        if not isinstance(exp, dict):
            raise InvalidInputError("config missing [experiment] table")
        model = exp.get("model")
        if model not in MODELS:
            raise InvalidInputError(
                f"experiment.model must be one of {MODELS}, got {model!r}")
        name = exp.get("name", "run")
        seed = int(exp.get("seed", 0))
        grid = data.get("grid")
        if not isinstance(grid, dict) or "dt" not in grid or "n_points" not in grid:
            raise InvalidInputError("config needs [grid] with dt and n_points")
        if float(grid["dt"]) <= 0:
            raise InvalidInputError("grid.dt must be positive")
        if int(grid["n_points"]) < 1:
            raise InvalidInputError("grid.n_points must be >= 1")
        obs = data.get("observables", {}).get("names", [])
        if not obs:
            raise InvalidInputError("config needs observables.names")
        analyses = tuple(data.get("analysis", []))
        for i, spec in enumerate(analyses):
            kind = spec.get("kind")
            if kind not in ANALYSES:
                raise InvalidInputError(
                    f"analysis[{i}].kind must be one of {ANALYSES}, got {kind!r}")
        return cls(name=name, model=model, seed=seed,
                   params=dict(data.get("params", {})),
                   initial=dict(data.get("initial", {})),
                   grid=dict(grid), observables=tuple(obs),
                   analyses=analyses, output=dict(data.get("output", {})))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def canonical(self) -> str:
        def render(value):
            if isinstance(value, dict):
                inner = ",".join(f"{k}={render(value[k])}" for k in sorted(value))
                return "{" + inner + "}"
            if isinstance(value, (list, tuple)):
                return "[" + ",".join(render(v) for v in value) + "]"
            if isinstance(value, float):
                return f"{value:.17g}"
            return repr(value)

        fields = {
            "name": self.name, "model": self.model, "seed": self.seed,
            "params": self.params, "initial": self.initial, "grid": self.grid,
            "observables": list(self.observables),
            "analyses": list(self.analyses), "output": self.output,
        }
        return render(fields)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def n_points(self, paper_scale: bool) -> int:
        if paper_scale and "n_points_paper" in self.grid:
            return int(self.grid["n_points_paper"])
        return int(self.grid["n_points"])


def _initial_state(initial: dict, which: str = "") -> FieldState:
    alpha2 = float(initial.get(f"alpha2{which}", 1.0))
    m = int(initial.get(f"m{which}", 0))
    tail_tol = float(initial.get("tail_tol", DEFAULT_TAIL_TOL))
    alpha = math.sqrt(alpha2)
    cutoff = auto_cutoff(alpha, m, tail_tol)
    if m == 0:
        return coherent_coefficients(alpha, cutoff)
    return pacs_coefficients(alpha, m, cutoff)


def build_evolution(config: ExperimentConfig):
    """Model evolution object (or a Kerr closure) for the configured system."""
    p = config.params
    if config.model == "bipartite":
        params = BipartiteParams(
            chi=float(p.get("chi", 0.0)),
            lambda1=float(p.get("lambda1", 0.0)),
            lambda2=float(p.get("lambda2", 0.0)),
            detuning1=float(p.get("detuning1", 0.0)),
            detuning2=float(p.get("detuning2", 0.0)),
        )
        return BipartiteEvolution(params, _initial_state(config.initial))
    if config.model == "tripartite":
        params = TripartiteParams(
            chi1=float(p.get("chi1", p.get("chi", 0.0))),
            chi2=float(p.get("chi2", p.get("chi", 0.0))),
            lambda1=float(p.get("lambda1", 0.0)),
            lambda2=float(p.get("lambda2", 0.0)),
            detuning1=float(p.get("detuning1", 0.0)),
            detuning2=float(p.get("detuning2", 0.0)),
        )
        return TripartiteEvolution(params, _initial_state(config.initial, "_1"),
                                   _initial_state(config.initial, "_2"))
    return _KerrEvolution(float(p.get("chi", 1.0)), _initial_state(config.initial))


class _KerrEvolution:
    """Self-interacting single mode: fidelity and photon statistics vs time."""

    def __init__(self, chi: float, field0: FieldState):
        self.chi = chi
        self.field0 = field0

    def describe(self) -> str:
        return f"kerr chi={self.chi} cutoff={self.field0.cutoff}"

    def series_values(self, which: str, t0: float, dt: float, n_times: int):
        n = np.arange(self.field0.cutoff + 1)
        p = self.field0.probabilities
        if which == "fidelity":
            t = t0 + dt * np.arange(n_times)
            # |sum_n p_n e^{-i chi n(n-1) t}|^2 in chunks
            out = np.empty(n_times)
            rates = self.chi * n * (n - 1)
            for lo in range(0, n_times, 65536):
                hi = min(lo + 65536, n_times)
                phases = np.exp(-1j * np.outer(t[lo:hi], rates))
                out[lo:hi] = np.abs(phases @ p) ** 2
            return out
        if which == "mean_photon":
            return np.full(n_times, float(n @ p))
        raise InvalidInputError(f"unknown Kerr observable {which!r}")


def _summary_lines(pairs) -> str:
    lines = []
    for key, value in pairs:
        if isinstance(value, float):
            lines.append(f"{key} = {value:.17g}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _write_rows(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


class RunContext:
    """Mutable state shared by the analyses of one run."""

    def __init__(self, config: ExperimentConfig, out_dir: Path, dt: float):
        self.config = config
        self.out_dir = out_dir
        self.dt = dt
        self.series: dict[str, ObservableSeries] = {}
        self.files: list[Path] = []
        self.fnn_d_min: int | None = None

    def emit(self, name: str, writer) -> Path:
        path = self.out_dir / name
        writer(path)
        self.files.append(path)
        return path


def _cells_for(spec: dict, series: ObservableSeries):
    n_cells = int(spec.get("n_cells", 50))
    cells = ergodicity.coarse_grain(series, n_cells)
    if "target_cell" in spec:
        target = int(spec["target_cell"])
    else:
        target = ergodicity.most_visited_interior_cell(cells)
    return cells, target


def _series_for(ctx: RunContext, spec: dict) -> ObservableSeries:
    name = spec.get("series", "mean_photon")
    if name not in ctx.series:
        raise InvalidInputError(
            f"analysis.series {name!r} not among computed observables "
            f"{sorted(ctx.series)}")
    return ctx.series[name]


def _run_first_return(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    cells, target = _cells_for(spec, src)
    stats = ergodicity.first_return_distribution(cells, target)
    base = f"analysis_{idx:02d}_first_return"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "tau,count", zip(stats.return_times.tolist(), stats.counts.tolist())))
    summary = [
        ("kind", "first_return"), ("series", src.label),
        ("n_cells", cells.n_cells), ("target_cell", target),
        ("cell_measure", float(cells.measures[target])),
        ("sample_count", stats.sample_count),
        ("mean_return_steps", stats.mean_return),
        ("top5_mass", ergodicity.top_bin_mass(stats)),
    ]
    try:
        rate, r2 = ergodicity.exponential_tail_fit(stats)
        summary += [("exp_rate_per_step", rate), ("exp_fit_r_squared", r2)]
    except Exception:
        summary += [("exp_rate_per_step", "nan"), ("exp_fit_r_squared", "nan")]
    ctx.emit(base + "_summary.txt",
             lambda p: Path(p).write_text(_summary_lines(summary)))
    if ctx.config.output.get("plots", True):
        ctx.emit(base + ".gp", lambda p: seriesio.write_gnuplot_script(
            p, base + ".csv", "first-return-time distribution", "tau (steps)",
            "count", style="impulses"))


def _run_kth_return(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    cells, target = _cells_for(spec, src)
    k = int(spec.get("k", 2))
    stats = ergodicity.kth_return_distribution(cells, target, k)
    base = f"analysis_{idx:02d}_return{k}"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "tau,count", zip(stats.return_times.tolist(), stats.counts.tolist())))
    ctx.emit(base + "_summary.txt", lambda p: Path(p).write_text(_summary_lines([
        ("kind", "kth_return"), ("k", k), ("target_cell", target),
        ("sample_count", stats.sample_count),
        ("mean_return_steps", stats.mean_return),
    ])))


def _run_poisson(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    cells, target = _cells_for(spec, src)
    ks = [int(k) for k in spec.get("ks", [2, 3, 4])]
    summary = [("kind", "poisson_consistency"), ("target_cell", target)]
    for k in ks:
        stat, dof, p = ergodicity.poisson_return_consistency(cells, target, k)
        summary += [(f"chi2_k{k}", stat), (f"dof_k{k}", dof), (f"p_value_k{k}", p)]
    ctx.emit(f"analysis_{idx:02d}_poisson_summary.txt",
             lambda p: Path(p).write_text(_summary_lines(summary)))


def _kac_files(ctx: RunContext, idx: int, fit, tag: str) -> None:
    base = f"analysis_{idx:02d}_{tag}"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "inverse_measure,mean_return",
        zip(fit.inverse_measures.tolist(), fit.mean_returns.tolist())))
    ctx.emit(base + "_summary.txt", lambda p: Path(p).write_text(_summary_lines([
        ("kind", tag), ("slope", fit.slope), ("intercept", fit.intercept),
        ("r_squared", fit.r_squared), ("dropped_cells", fit.dropped_cells),
    ])))
    if ctx.config.output.get("plots", True):
        ctx.emit(base + ".gp", lambda p: seriesio.write_gnuplot_script(
            p, base + ".csv", "mean recurrence time vs 1/measure",
            "1/measure", "mean return (steps)", style="points"))


def _run_kac(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    counts = [int(c) for c in spec.get("cell_counts", [10, 15, 20, 30, 40, 60])]
    fit = ergodicity.mean_recurrence_vs_measure(
        src, counts, min_returns=int(spec.get("min_returns", 10)))
    _kac_files(ctx, idx, fit, "kac")


def _run_iid_control_kac(ctx: RunContext, idx: int, spec: dict) -> None:
    n = int(spec.get("n_points", 300_000))
    control = synthetic.iid_uniform_series(n, seed=ctx.config.seed)
    counts = [int(c) for c in spec.get("cell_counts", [10, 15, 20, 30, 40, 60])]
    fit = ergodicity.mean_recurrence_vs_measure(
        control, counts, min_returns=int(spec.get("min_returns", 10)))
    _kac_files(ctx, idx, fit, "iid_control_kac")


def _run_return_map(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    lag = int(spec.get("lag", 1))
    pairs = ergodicity.return_map(src, lag)
    base = f"analysis_{idx:02d}_return_map"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "s_tau,s_tau_plus_lag", map(tuple, pairs.tolist())))
    if ctx.config.output.get("plots", True):
        ctx.emit(base + ".gp", lambda p: seriesio.write_gnuplot_script(
            p, base + ".csv", f"return map (lag {lag})", "s(tau)",
            f"s(tau+{lag})", style="dots"))


def _run_fnn(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    rep = ergodicity.fnn_embedding_dimension(
        src,
        delay=spec.get("delay"),
        d_max=int(spec.get("d_max", 10)),
        r_tol=float(spec.get("r_tol", 10.0)),
        a_tol=float(spec.get("a_tol", 2.0)),
        theiler=spec.get("theiler"),
        noise_scale=float(spec.get("noise_scale", 0.0)),
        max_refs=spec.get("max_refs"),
    )
    ctx.fnn_d_min = rep.d_min
    base = f"analysis_{idx:02d}_fnn"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "dimension,fnn_fraction",
        zip(rep.dimensions.tolist(), rep.fnn_fraction.tolist())))
    ctx.emit(base + "_summary.txt", lambda p: Path(p).write_text(_summary_lines([
        ("kind", "fnn"), ("series", src.label),
        ("d_min", rep.d_min if rep.d_min is not None else "none"),
        ("saturated", rep.saturated), ("delay", rep.delay),
        ("theiler", rep.theiler), ("r_tol", rep.r_tol), ("a_tol", rep.a_tol),
    ])))
    if ctx.config.output.get("plots", True):
        ctx.emit(base + ".gp", lambda p: seriesio.write_gnuplot_script(
            p, base + ".csv", "fraction of false nearest neighbours",
            "embedding dimension d", "FNN fraction", style="linespoints"))


def _run_rosenstein(ctx: RunContext, idx: int, spec: dict) -> None:
    src = _series_for(ctx, spec)
    dim = spec.get("dim")
    if dim is None:
        if ctx.fnn_d_min is None:
            raise InvalidInputError(
                "rosenstein.dim omitted and no preceding fnn analysis found d_min")
        dim = ctx.fnn_d_min
    fit_range = spec.get("fit_range")
    rep = ergodicity.rosenstein_mle(
        src, dim=int(dim),
        delay=int(spec.get("delay", 1)),
        theiler=spec.get("theiler"),
        k_max=int(spec.get("k_max", 100)),
        fit_range=tuple(fit_range) if fit_range else None,
        max_refs=spec.get("max_refs"),
    )
    base = f"analysis_{idx:02d}_rosenstein"
    ctx.emit(base + ".csv", lambda p: _write_rows(
        p, "k,mean_log_divergence",
        zip(rep.k_values.tolist(), rep.divergence_curve.tolist())))
    ctx.emit(base + "_summary.txt", lambda p: Path(p).write_text(_summary_lines([
        ("kind", "rosenstein"), ("series", src.label), ("dim", rep.dim),
        ("delay", rep.delay), ("theiler", rep.theiler),
        ("fit_lo", rep.fit_range[0]), ("fit_hi", rep.fit_range[1]),
        ("slope_per_step", rep.slope), ("slope_per_time", rep.slope_per_time),
    ])))
    if ctx.config.output.get("plots", True):
        ctx.emit(base + ".gp", lambda p: seriesio.write_gnuplot_script(
            p, base + ".csv", "average log divergence of neighbour pairs",
            "k (steps)", "<ln d(k)>", style="linespoints"))


_ANALYSIS_RUNNERS = {
    "first_return": _run_first_return,
    "kth_return": _run_kth_return,
    "poisson_consistency": _run_poisson,
    "kac": _run_kac,
    "iid_control_kac": _run_iid_control_kac,
    "return_map": _run_return_map,
    "fnn": _run_fnn,
    "rosenstein": _run_rosenstein,
}


def run_experiment(config: ExperimentConfig, out_dir, paper_scale: bool = False,
                   threads: int | None = None) -> Path:
    """Execute one configured experiment; returns the manifest path."""
    if threads is not None:
        import numba

        numba.set_num_threads(max(1, threads))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    dt = float(config.grid["dt"])
    t0 = float(config.grid.get("t0", 0.0))
    n_points = config.n_points(paper_scale)
    evolution = build_evolution(config)

    ctx = RunContext(config, out_dir, dt)
    formats = config.output.get("formats", ["binary", "csv"])
    runtimes = []
    for obs in config.observables:
        tic = time.time()
        s = make_series(evolution, obs, dt=dt, n_times=n_points, t0=t0)
        ctx.series[obs] = s
        if "binary" in formats:
            ctx.emit(f"series_{obs}.bin", lambda p: seriesio.save_series_binary(p, s))
        if "csv" in formats:
            ctx.emit(f"series_{obs}.csv", lambda p: seriesio.save_series_csv(p, s))
        if config.output.get("plots", True) and "csv" in formats:
            ctx.emit(f"series_{obs}.gp", lambda p: seriesio.write_gnuplot_script(
                p, f"series_{obs}.csv", f"{obs} vs time", "t", obs))
        runtimes.append((f"observable_{obs}", time.time() - tic))

    for idx, spec in enumerate(config.analyses, start=1):
        tic = time.time()
        _ANALYSIS_RUNNERS[spec["kind"]](ctx, idx, spec)
        runtimes.append((f"analysis_{idx:02d}_{spec['kind']}", time.time() - tic))

    manifest = out_dir / "manifest.txt"
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"name = {config.name}\n")
        fh.write(f"code_version = vatom {__version__}\n")
        fh.write(f"config_hash = {config.config_hash()}\n")
        fh.write(f"paper_scale = {paper_scale}\n")
        fh.write(f"n_points = {n_points}\n")
        fh.write("\n[files]\n")
        for path in ctx.files:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            fh.write(f"{path.name} = {digest}\n")
        fh.write("\n[runtimes_seconds]\n")
        for tag, secs in runtimes:
            fh.write(f"{tag} = {secs:.3f}\n")
        fh.write(f"total = {time.time() - started:.3f}\n")
    return manifest


def run_analyses_on_series(series_path, analysis_config_path, out_dir,
                           seed: int = 0) -> Path:
    """The ``analyze`` entry point: load a persisted series, apply analyses."""
    src = seriesio.load_series(series_path)
    with open(analysis_config_path, "rb") as fh:
        data = tomllib.load(fh)
    specs = data.get("analysis", [])
    if not specs:
        raise InvalidInputError("analysis config has no [[analysis]] tables")
    config = ExperimentConfig(
        name=data.get("experiment", {}).get("name", "analyze"),
        model="bipartite", seed=int(data.get("experiment", {}).get("seed", seed)),
        params={}, initial={}, grid={"dt": src.dt, "n_points": len(src)},
        observables=(src.label,), analyses=tuple(specs),
        output=dict(data.get("output", {})))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config, out_dir, src.dt)
    ctx.series[src.label] = src
    for idx, spec in enumerate(specs, start=1):
        kind = spec.get("kind")
        if kind not in _ANALYSIS_RUNNERS:
            raise InvalidInputError(f"unknown analysis kind {kind!r}")
        runner = _ANALYSIS_RUNNERS[kind]
        if spec.get("series") is None:
            spec = dict(spec, series=src.label)
        runner(ctx, idx, spec)
    manifest = out_dir / "manifest.txt"
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"name = {config.name}\n")
        fh.write(f"code_version = vatom {__version__}\n")
        fh.write(f"source_series = {Path(series_path).name}\n")
        fh.write("\n[files]\n")
        for path in ctx.files:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            fh.write(f"{path.name} = {digest}\n")
    return manifest
