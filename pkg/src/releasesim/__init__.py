"""Two-layer drug release: kinetics-coupled diffusion through a polymeric
matrix and the tissue it feeds, with closed-form single-mode solutions, a
conservative composite-grid solver, and the verification glue between them.
"""

from .analytic import (AnalyticParams, MatrixRates, TissueRates, default_mode,
                       eval_matrix, eval_tissue, interface_fluxes,
                       matrix_rates, residuals, tissue_rates)
from .errors import ConfigError, NumericalError, ValidationError
from .metrics import (NAMED_METRICS, ProbeSeriesMetrics, ReleaseMetrics,
                      SensitivityRecord, SweepRow, local_sensitivity,
                      parabolic_peak, probe_metrics, probe_series,
                      release_metrics, sweep)
from .params import (INFINITE, DimensionlessParams, InterfaceParams,
                     MatrixParams, TissueParams, nondimensionalize, phi0,
                     redimensionalize, reference_params, validate_params)
from .runio import (load_config, save_config, spec_to_config, write_json,
                    write_matrix_csv, write_sweep_csv, write_tissue_csv)
from .scenario import (RunSpec, default_spec, get_param, param_names,
                       replace_param, run_spec)
from .solver import (SINK, ZERO_FLUX, CompositeGrid, SimState, SolverConfig,
                     ThetaStepper, TimeSeries, initialize, make_grid, simulate,
                     step)
from .verification import (ComparisonReport, ConvergenceReport, MassLedger,
                           analytic_state, compare_analytic_numeric,
                           convergence_study, mass_audit, ode_oracle,
                           oracle_time_grid, sample_mode, sample_params,
                           spatial_convergence, temporal_convergence)

__version__ = "0.1.0"

__all__ = [
    "AnalyticParams", "MatrixRates", "TissueRates", "default_mode",
    "eval_matrix", "eval_tissue", "interface_fluxes", "matrix_rates",
    "residuals", "tissue_rates",
    "ConfigError", "NumericalError", "ValidationError",
    "NAMED_METRICS", "ProbeSeriesMetrics", "ReleaseMetrics",
    "SensitivityRecord", "SweepRow", "local_sensitivity", "parabolic_peak",
    "probe_metrics", "probe_series", "release_metrics", "sweep",
    "INFINITE", "DimensionlessParams", "InterfaceParams", "MatrixParams",
    "TissueParams", "nondimensionalize", "phi0", "redimensionalize",
    "reference_params", "validate_params",
    "load_config", "save_config", "spec_to_config", "write_json",
    "write_matrix_csv", "write_sweep_csv", "write_tissue_csv",
    "RunSpec", "default_spec", "get_param", "param_names", "replace_param",
    "run_spec",
    "SINK", "ZERO_FLUX", "CompositeGrid", "SimState", "SolverConfig",
    "ThetaStepper", "TimeSeries", "initialize", "make_grid", "simulate", "step",
    "ComparisonReport", "ConvergenceReport", "MassLedger", "analytic_state",
    "compare_analytic_numeric", "convergence_study", "mass_audit",
    "ode_oracle", "oracle_time_grid", "sample_mode", "sample_params",
    "spatial_convergence", "temporal_convergence",
    "__version__",
]
