"""Well-balanced, positivity-preserving DG solver for variable-density
shallow water flow coupled with multi-constituent solute transport."""

from .exceptions import ConfigError, DomainError, InvalidStateError, PositivityError
from .grid import (
    Grid,
    NodalBasis,
    QuadratureRule,
    build_grid,
    gauss_legendre,
    gauss_lobatto,
    interpolate_nodal,
    node_coordinates,
)
from .state import (
    Bathymetry,
    DgField,
    Primitive,
    cell_average,
    cell_averages,
    pack_conserved,
    recover_primitive,
    relative_density,
)
from .physics import compute_B, lf_flux, physical_flux, point_speeds, source_term, wave_speed
from .limiters import (
    LimiterConfig,
    LimiterReport,
    apply_stage_limiters,
    minmod_slope,
    positivity_scale,
)
from .integrator import (
    BoundaryCondition,
    BoundarySpec,
    DIRICHLET,
    OUTFLOW,
    RunRecord,
    StepControls,
    WALL,
    compute_dt,
    dg_residual,
    simulate_field,
    ssp_rk3_step,
)
from .scenarios import (
    SCENARIO_NAMES,
    ExactSolution,
    Scenario,
    build_scenario,
    build_still_water,
    exact_solution,
    initial_condition,
    scenario_grid,
)
from .diagnostics import (
    ConvergenceTable,
    ErrorReport,
    RunResult,
    conserved_totals,
    convergence_table,
    l1_error,
    lemma1_oracle,
    run_scenario,
    well_balance_residual,
    write_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InvalidStateError",
    "PositivityError",
    "Grid",
    "NodalBasis",
    "QuadratureRule",
    "build_grid",
    "gauss_legendre",
    "gauss_lobatto",
    "interpolate_nodal",
    "node_coordinates",
    "Bathymetry",
    "DgField",
    "Primitive",
    "cell_average",
    "cell_averages",
    "pack_conserved",
    "recover_primitive",
    "relative_density",
    "compute_B",
    "lf_flux",
    "physical_flux",
    "point_speeds",
    "source_term",
    "wave_speed",
    "LimiterConfig",
    "LimiterReport",
    "apply_stage_limiters",
    "minmod_slope",
    "positivity_scale",
    "BoundaryCondition",
    "BoundarySpec",
    "DIRICHLET",
    "OUTFLOW",
    "WALL",
    "RunRecord",
    "StepControls",
    "compute_dt",
    "dg_residual",
    "simulate_field",
    "ssp_rk3_step",
    "SCENARIO_NAMES",
    "ExactSolution",
    "Scenario",
    "build_scenario",
    "build_still_water",
    "exact_solution",
    "initial_condition",
    "scenario_grid",
    "ConvergenceTable",
    "ErrorReport",
    "RunResult",
    "conserved_totals",
    "convergence_table",
    "l1_error",
    "lemma1_oracle",
    "run_scenario",
    "well_balance_residual",
    "write_snapshot",
]
