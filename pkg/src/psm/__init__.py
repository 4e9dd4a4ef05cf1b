"""Planted submatrix detection and recovery with Gaussian noise.

Submodules: :mod:`psm.model` (parameters, supports, synthesis),
:mod:`psm.detectors` (sum and scan tests), :mod:`psm.recovery` (ML and
peeling estimators), :mod:`psm.theory` (closed-form bounds and the regime
classifier) and :mod:`psm.harness` (seeded Monte Carlo runner).
"""

from .detectors import (
    DetectionOutcome,
    PrefixSumTable,
    scan_statistic_arbitrary,
    scan_statistic_consecutive,
    sum_statistic,
    tau_scan_csd,
    tau_scan_sd,
    tau_sum,
)
from .errors import BudgetExceededError, ConfigError, PSMError, RecoveryError, SamplingError, SaturationError
from .harness import (
    CrossvalReport,
    ExperimentConfig,
    ExperimentTask,
    RecoveryEstimate,
    RiskEstimate,
    crossval,
    estimate_recovery,
    estimate_risk,
    sweep,
)
from .io import emit, read_observation, write_observation
from .model import (
    Boundary,
    ModelConfig,
    Observation,
    Placement,
    Rectangle,
    SupportSet,
    Variant,
    sample_null,
    sample_observation,
    sample_support,
    validate_support,
)
from .recovery import Estimator, RecoveryResult, exact_match, ml_exhaustive, modified_peel, overlap_fraction, peel
from .theory import RegimeLabel, Task, regime_classify, threshold_table

__version__ = "0.1.0"
