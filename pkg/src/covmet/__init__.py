"""Covariance-measure conditional independence tests.

Tests whether a response Y is conditionally independent of candidate
predictors X given a conditioning block Z, by regressing both sides on
Z with pluggable engines and examining the covariance structure of the
residuals.  Two tests are provided: a chi-squared test on the full
residual covariance vector (``gcm_test``) and a sample-splitting
projection test with one-sided normal calibration (``pcm_test``),
plus Holm-corrected families, a simulation harness, and a CLI.
"""

from .data import ColumnRoles, Dataset, read_csv, select_blocks, write_csv
from .errors import (
    CovmetError,
    DataFormatError,
    DegenerateResidualsError,
    DomainError,
    RoleError,
)
from .gcm import GcmResult, gcm_statistic, gcm_test
from .multiplicity import (
    HypothesisResult,
    TestConfig,
    TestReport,
    bonferroni_adjust,
    holm_adjust,
    modality_select,
    variable_sweep,
)
from .numkit import RngStream, chi2_sf, normal_sf, rng_split, sym_pinv_sqrt
from .pcm import PcmEngines, PcmResult, make_split_plan, pcm_single, pcm_test
from .regression import (
    FittedModel,
    RegressorSpec,
    cv_select_lambda,
    fit,
    predict,
    residuals,
    spec_from_json,
    spec_to_json,
)
from .simharness import (
    CATALOG,
    DgpSpec,
    ExperimentResult,
    generate,
    run_calibration,
    run_power,
    run_timing,
    two_modality_fixture,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "ColumnRoles",
    "CovmetError",
    "DataFormatError",
    "Dataset",
    "DegenerateResidualsError",
    "DgpSpec",
    "DomainError",
    "ExperimentResult",
    "FittedModel",
    "GcmResult",
    "HypothesisResult",
    "PcmEngines",
    "PcmResult",
    "RegressorSpec",
    "RngStream",
    "RoleError",
    "TestConfig",
    "TestReport",
    "bonferroni_adjust",
    "chi2_sf",
    "cv_select_lambda",
    "fit",
    "gcm_statistic",
    "gcm_test",
    "generate",
    "holm_adjust",
    "make_split_plan",
    "modality_select",
    "normal_sf",
    "pcm_single",
    "pcm_test",
    "predict",
    "read_csv",
    "residuals",
    "rng_split",
    "run_calibration",
    "run_power",
    "run_timing",
    "select_blocks",
    "spec_from_json",
    "spec_to_json",
    "sym_pinv_sqrt",
    "two_modality_fixture",
    "variable_sweep",
    "write_csv",
    "__version__",
]
