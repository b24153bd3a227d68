"""Facility-accessibility grading and mixture-of-regressions analysis.

Grid cells get per-kind accessibility grades from nearest-facility
distances, the grades become z-scored covariates in a hedonic regression of
log land price, and a finite mixture of Gaussian linear regressions (fitted
by EM) splits the cells into latent market segments.  Model selection via
AIC/BIC and the normalized entropy criterion; diagnostics, a synthetic data
generator, and a file-based CLI round out the pipeline.
"""

from .access import (
    KINDS,
    NO_FACILITY,
    FacilityKind,
    GradeMatrix,
    GradeScaler,
    GradeTable,
    ZScoreMatrix,
    euclidean,
    grade_all,
    grade_of,
    nearest_distance,
    standardize,
)
from .design import CONTROL_COLUMNS, DESIGN_COLUMNS, Dataset, build_design
from .diagnostics import (
    ClusterDescriptives,
    CoefficientTable,
    VifReport,
    cluster_descriptives,
    coefficient_table,
    vif,
)
from .grid import (
    FacilityPoint,
    GridCell,
    StudyArea,
    ValidationReport,
    load_cells,
    load_facilities,
    save_cells,
    save_facilities,
    validate_area,
)
from .mixture import (
    EMConfig,
    MixtureFit,
    MixtureOfRegressions,
    MixtureParams,
    OLSFit,
    assign,
    e_step,
    fit_em,
    load_fit,
    loglik,
    m_step,
    ols_fit,
    run_em,
    save_fit,
    weighted_least_squares,
)
from .selection import (
    SelectionReport,
    SelectionRow,
    aic,
    bic,
    df_of,
    entropy,
    nec,
    select,
    sweep,
)
from .synth import PlantedTruth, SynthResult, SynthSpec, generate, planted_spec

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "NO_FACILITY",
    "CONTROL_COLUMNS",
    "DESIGN_COLUMNS",
    "FacilityKind",
    "GradeMatrix",
    "GradeScaler",
    "GradeTable",
    "ZScoreMatrix",
    "euclidean",
    "grade_all",
    "grade_of",
    "nearest_distance",
    "standardize",
    "Dataset",
    "build_design",
    "ClusterDescriptives",
    "CoefficientTable",
    "VifReport",
    "cluster_descriptives",
    "coefficient_table",
    "vif",
    "FacilityPoint",
    "GridCell",
    "StudyArea",
    "ValidationReport",
    "load_cells",
    "load_facilities",
    "save_cells",
    "save_facilities",
    "validate_area",
    "EMConfig",
    "MixtureFit",
    "MixtureOfRegressions",
    "MixtureParams",
    "OLSFit",
    "assign",
    "e_step",
    "fit_em",
    "load_fit",
    "loglik",
    "m_step",
    "ols_fit",
    "run_em",
    "save_fit",
    "weighted_least_squares",
    "SelectionReport",
    "SelectionRow",
    "aic",
    "bic",
    "df_of",
    "entropy",
    "nec",
    "select",
    "sweep",
    "PlantedTruth",
    "SynthResult",
    "SynthSpec",
    "generate",
    "planted_spec",
    "__version__",
]
