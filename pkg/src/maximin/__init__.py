"""Maximin-effect estimation for grouped linear regression.

Estimate the coefficient vector that maximizes the explained variance
in the worst group, aggregate per-group least-squares fits through a
simplex-constrained quadratic program, and wrap the estimate in an
asymptotically valid confidence ellipsoid. A Monte-Carlo harness
measures coverage over synthetic scenario grids, and a covering-based
conservative region is available when the design covariance is known.
"""

from .asymvar import (
    TIE_PROBE_LEVEL,
    AsymptoticCovariance,
    assemble_W,
    empirical_C,
    gaussian_population_C,
    sigma_term_V,
    tied_neighbors,
)
from .confidence import (
    ConfidenceRegion,
    build_region,
    chi2_cdf,
    chi2_quantile,
    contains,
    max_eigenvalue,
)
from .errors import (
    BudgetError,
    ConditioningError,
    ConvergenceError,
    CsvFormatError,
    DefinitenessError,
    DegenerateGeometryError,
    DimensionError,
    EstimationError,
    RankError,
    SingularFitError,
)
from .estimator import MaximinEstimator
from .geometry import (
    MaggingDifferential,
    SigmaMetric,
    affine_project,
    complement_project,
    dmagging_dB,
    dmagging_dSigma,
    magging_differential,
)
from .linmodel import (
    GroupedDataset,
    GroupEstimates,
    ScenarioSpec,
    bagging,
    fit,
    generate,
    load_group_csvs,
    load_grouped_csv,
    true_coefficients,
)
from .magging import (
    MaggingSolution,
    active_set,
    brute_force_oracle,
    explained_variance,
    maximin_point,
)
from .pipeline import Analysis, analyze_dataset, estimate_dataset
from .relaxation import (
    CoveringRegion,
    GroupBoxes,
    contains_relaxed,
    covering_region,
    group_confidence_boxes,
    maximin_norm_gap,
)
from .simulate import (
    CoverageReport,
    grid_to_csv,
    grid_to_json,
    run_cell,
    run_grid,
    scenario_presets,
    true_maximin,
)

__version__ = "0.1.0"

__all__ = [
    "Analysis",
    "AsymptoticCovariance",
    "BudgetError",
    "ConditioningError",
    "ConfidenceRegion",
    "ConvergenceError",
    "CoverageReport",
    "CoveringRegion",
    "CsvFormatError",
    "DefinitenessError",
    "DegenerateGeometryError",
    "DimensionError",
    "EstimationError",
    "GroupBoxes",
    "GroupedDataset",
    "GroupEstimates",
    "MaggingDifferential",
    "MaggingSolution",
    "MaximinEstimator",
    "RankError",
    "ScenarioSpec",
    "SigmaMetric",
    "SingularFitError",
    "TIE_PROBE_LEVEL",
    "active_set",
    "affine_project",
    "analyze_dataset",
    "assemble_W",
    "bagging",
    "brute_force_oracle",
    "build_region",
    "chi2_cdf",
    "chi2_quantile",
    "complement_project",
    "contains",
    "contains_relaxed",
    "covering_region",
    "dmagging_dB",
    "dmagging_dSigma",
    "empirical_C",
    "estimate_dataset",
    "explained_variance",
    "fit",
    "gaussian_population_C",
    "generate",
    "grid_to_csv",
    "grid_to_json",
    "group_confidence_boxes",
    "load_group_csvs",
    "load_grouped_csv",
    "magging_differential",
    "max_eigenvalue",
    "maximin_norm_gap",
    "maximin_point",
    "run_cell",
    "run_grid",
    "scenario_presets",
    "sigma_term_V",
    "tied_neighbors",
    "true_coefficients",
    "true_maximin",
]
