"""Simulation-based inference for two-group quantitative studies.

Reallocation (permutation) tests, bootstrap resampling, the closed-form
variances they target, brute-force oracles for verifying those formulas, and a
CLI that reproduces the published worked examples end to end.
"""

from .data import (
    AdditiveShift,
    DataError,
    DatasetManifest,
    EqualMeans,
    Hypothesis,
    ManifestCheck,
    ParseError,
    SchemaError,
    SharpNull,
    TwoGroupSample,
    ValidationError,
    fixture_path,
    load_fixture,
    load_two_group_sample,
    sample_to_csv,
    validate_manifest,
)
from .engine import (
    ExactSizeError,
    PlanError,
    PotentialOutcomeTable,
    SimulationPlan,
    SimulationResult,
    impute_additive,
    reallocate_exact,
    reallocate_mc,
    resample_equal_means,
    resample_pooled,
    resample_within,
    run_plan,
)
from .inference import (
    InferenceReport,
    NumericalError,
    ci_bootstrap_percentile,
    ci_bootstrap_t,
    ci_invert_reallocation,
    ci_reallocation_sharp_se,
    p_value,
)
from .moments import (
    DistributionSummary,
    PartialMoments,
    diff_in_means,
    grand_variance,
    group_variance,
    summarize,
)
from .oracle import (
    SyntheticPopulation,
    allocation_count,
    allocation_covariance_check,
    allocation_draws,
    enumerate_allocations,
    estimand_tau_ra,
    repeated_sampling_variance,
    true_allocation_variance,
)
from .theory import (
    TheoryError,
    VarianceScenario,
    curve_to_csv,
    var_estimation_random_allocation,
    var_estimation_random_sampling,
    var_estimation_resample,
    var_reallocate_additive,
    var_sharp_random_sampling,
    var_sharp_reallocate,
    var_sharp_resample,
    variance_curve,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
