"""Interlaboratory precision of linear dose-response measurement methods."""

from .anova import (
    Analysis,
    AnovaResult,
    FTest,
    PrecisionProfile,
    SumsOfSquares,
    UndefinedTestError,
    VarianceComponents,
    analyze,
    basic_table,
    detailed_table,
    expected_mean_squares,
    precision_profile,
    run_f_tests,
    sums_of_squares,
    variance_components,
)
from .fdist import f_cdf, f_quantile, f_sf
from .ingest import (
    BalanceError,
    Dataset,
    ParseError,
    RawTable,
    TransformError,
    TransformSpec,
    apply_transforms,
    example_path,
    load_dataset,
    parse_csv,
    validate_balanced,
)
from .model import Design, LabEffects, OverallFit, design_stats, fit_overall, lab_effects

__version__ = "0.1.0"
