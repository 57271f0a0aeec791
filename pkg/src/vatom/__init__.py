"""V-type atom + Kerr field simulator and time-series analysis toolkit."""

from .bipartite import (
    BipartiteAmplitudes,
    BipartiteEvolution,
    BipartiteParams,
    BipartiteSector,
    atom_reduced_density,
    build_sector,
    field_reduced_density,
    sector_amplitudes,
)
from .eigenmodes import (
    CubicModes,
    QuadraticModes,
    SectorModes,
    mode_weights,
    sector_modes,
    solve_cubic_trig,
    solve_quadratic,
)
from .field_states import (
    FieldState,
    auto_cutoff,
    coherent_coefficients,
    fidelity,
    overlap,
    pacs_coefficients,
)
from .observables import (
    ObservableSeries,
    ReducedDensityMatrix,
    mandel_q,
    mean_photon_number,
    series,
    svne,
)
from .ode_oracle import (
    IntegratorConfig,
    integrate_bipartite_sector,
    integrate_tripartite_sector,
    kerr_evolution,
)
from .tripartite import (
    TripartiteAmplitudes,
    TripartiteEvolution,
    TripartiteParams,
    TripartiteSector,
    build_sector_2mode,
    complement_reduced_density,
    field1_reduced_density,
    sector_amplitudes_2mode,
)

__version__ = "0.1.0"

__all__ = [
    "BipartiteAmplitudes", "BipartiteEvolution", "BipartiteParams",
    "BipartiteSector", "CubicModes", "FieldState", "IntegratorConfig",
    "ObservableSeries", "QuadraticModes", "ReducedDensityMatrix",
    "SectorModes", "TripartiteAmplitudes", "TripartiteEvolution",
    "TripartiteParams", "TripartiteSector", "atom_reduced_density",
    "auto_cutoff", "build_sector", "build_sector_2mode",
    "coherent_coefficients", "complement_reduced_density", "fidelity",
    "field1_reduced_density", "field_reduced_density",
    "integrate_bipartite_sector", "integrate_tripartite_sector",
    "kerr_evolution", "mandel_q", "mean_photon_number", "mode_weights",
    "overlap", "pacs_coefficients", "sector_amplitudes",
    "sector_amplitudes_2mode", "sector_modes", "series", "solve_cubic_trig",
    "solve_quadratic", "svne",
]
