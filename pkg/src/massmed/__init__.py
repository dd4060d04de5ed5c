"""Mediation analysis for massive data: subsampled double bootstrap (SDB)
intervals and divide-and-conquer (DC) Sobel tests for multi-mediator linear
and logistic models, with a simulation and benchmarking harness."""
from .analysis import AnalysisReport, analyze, analyze_csv
from .data_io import ColumnMapping, load_csv, write_csv
from .dc import BlockEstimates, DcConfig, DcTestReport, aggregate, partition, run_dc_sobel, sobel_test
from .errors import (
    DataError,
    DegenerateVarianceError,
    EffectRangeError,
    EmptyDataError,
    EngineError,
    FitError,
    InvalidArgumentError,
    MassmedError,
    NumericalError,
    SchemaError,
    SeparationError,
    SingularDesignError,
    UnknownScenarioError,
    ValidationError,
)
from .mediation import (
    ASSUMPTIONS,
    Dataset,
    EffectQuery,
    LinearEffects,
    MediationFit,
    ModelParams,
    OddsRatioEffects,
    RareOutcomeCheck,
    effects_linear,
    effects_logistic_or,
    fit_mediation,
    rare_outcome_check,
    sobel_se,
)
from .regression import (
    FitResult,
    fit_linear,
    fit_linear_many,
    fit_linear_weighted,
    fit_logistic,
    fit_logistic_weighted,
)
from .sdb import IntervalReport, SdbConfig, run_full_bootstrap, run_sdb
from .simgen import SimScenario, generate, get_scenario, scenario_catalog
from .stochastics import (
    RngStream,
    derive_seed,
    empirical_quantile,
    multinomial_uniform,
    sample_mvn,
    sample_without_replacement,
    subset_size,
)
from .studies import ExperimentMetrics, run_ci_study, run_test_study, run_timing

__version__ = "0.1.0"
