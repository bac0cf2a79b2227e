"""Error-in-variables estimation with divide-and-conquer median aggregation.

Library layout:

- ``data_model`` — observation containers, CSV ingestion, panel indexing
- ``dgp`` — calibrated simulation design (standardized-Gamma shocks,
  AR(1) latents, covariance targeting)
- ``estimators`` — OLS and the third-order moment ratio, with control
  partialling and its plug-in variance
- ``dc`` — block partitioning, subsample ratios, panel transforms, median
  aggregation
- ``inference`` — sign-flip bootstrap and Wald intervals
- ``experiments`` — Monte Carlo harness and expanding-window driver
- ``service`` / ``cli`` — FastAPI wrapper and its thin command-line client
"""

__version__ = "0.1.0"

from .data_model import (
    CrossSection,
    EstimateReport,
    PanelData,
    cross_section_at,
    discard_to_multiple,
    load_panel_csv,
    write_panel_csv,
)
from .dc import (
    BlockPartition,
    SubsampleEstimates,
    block_demean,
    dc_estimate,
    dc_subsample,
    make_partition,
    panel_dc_estimate,
    pooled_design,
    within_transform,
)
from .dgp import (
    DgpConfig,
    SimulatedPanel,
    generate_panel,
    sample_std_gamma,
    simulate_ar1,
    target_covariance,
)
from .estimators import (
    MomentSums,
    Residualized,
    asy_var_3m,
    gamma_ci_draws,
    geary_3m,
    moment_sums,
    ols,
    partial_out,
)
from .experiments import (
    McConfig,
    McSummary,
    WindowResult,
    estimate_panel,
    expanding_window,
    run_mc,
    summarize_tables,
)
from .inference import (
    BootstrapConfig,
    ConfidenceInterval,
    dc_bootstrap_ci,
    dc_bootstrap_gamma_ci,
    wald_ci,
)

__all__ = [
    "__version__",
    "CrossSection", "PanelData", "EstimateReport",
    "load_panel_csv", "write_panel_csv", "cross_section_at", "discard_to_multiple",
    "DgpConfig", "SimulatedPanel", "sample_std_gamma", "simulate_ar1",
    "target_covariance", "generate_panel",
    "MomentSums", "Residualized", "moment_sums", "ols", "geary_3m",
    "asy_var_3m", "partial_out", "gamma_ci_draws",
    "BlockPartition", "SubsampleEstimates", "make_partition", "dc_subsample",
    "dc_estimate", "within_transform", "block_demean", "pooled_design",
    "panel_dc_estimate",
    "BootstrapConfig", "ConfidenceInterval", "dc_bootstrap_ci",
    "dc_bootstrap_gamma_ci", "wald_ci",
    "McConfig", "McSummary", "WindowResult", "estimate_panel", "run_mc",
    "summarize_tables", "expanding_window",
]
