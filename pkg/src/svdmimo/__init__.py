"""svdmimo: link-level simulation of importance-aware transmission over
SVD-precoded single-user and multi-user MIMO channels.

The package decomposes into a complex linear-algebra kernel
(:mod:`svdmimo.linalg`), channel sampling and noise
(:mod:`svdmimo.channel`), SVD precoders (:mod:`svdmimo.precoding`),
importance scheduling (:mod:`svdmimo.scheduling`), pilot-based channel
estimation (:mod:`svdmimo.estimation`), a Monte Carlo experiment engine
(:mod:`svdmimo.harness`), and result writers plus a command line front
end (:mod:`svdmimo.results_io`, :mod:`svdmimo.cli`).
"""

__version__ = "0.1.0"

from .channel import (
    CONVENTIONS,
    ChannelRealization,
    NoiseSpec,
    PilotBlock,
    derive_rng,
    sample_rayleigh,
    send_pilots,
    transmit,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateChannelError,
    EstimationError,
    NumericError,
    ShapeError,
    SvdMimoError,
)
from .estimation import (
    ChannelEstimate,
    LeastSquaresChannelEstimator,
    MmseChannelEstimator,
    estimation_mse,
    ls_estimate,
    mmse_estimate,
    refine,
)
from .harness import (
    AVERAGINGS,
    ESTIMATORS,
    POLICIES,
    PROFILES,
    REFERENCE_EQUIVALENT_SNR_DB,
    REFERENCE_TRUE_SNR_DB,
    CalibrationResult,
    ExperimentConfig,
    MetricsRecord,
    calibrate_convention,
    make_importance,
    run_chain_once,
    run_end_to_end,
    run_equivalent_snr_table,
    run_estimation_sweep,
)
from .linalg import SvdTriple, diag_extended, hermitian, matmul, pinv, svd
from .precoding import (
    EquivalentSubchannels,
    MuPrecoder,
    MuUserPrecoder,
    SuPrecoder,
    decompose_user,
    equivalent_snrs_from_gains,
)
from .scheduling import (
    FeatureBlock,
    ImportanceScheduler,
    ScheduleMap,
    mu_assignment,
    resort,
    select,
    sort_by_importance,
    su_assignment,
    to_complex_symbols,
    to_real_features,
)

__all__ = [
    "__version__",
    "CONVENTIONS",
    "AVERAGINGS",
    "ESTIMATORS",
    "POLICIES",
    "PROFILES",
    "REFERENCE_EQUIVALENT_SNR_DB",
    "REFERENCE_TRUE_SNR_DB",
    "ChannelRealization",
    "NoiseSpec",
    "PilotBlock",
    "derive_rng",
    "sample_rayleigh",
    "send_pilots",
    "transmit",
    "SvdMimoError",
    "ShapeError",
    "ConfigError",
    "NumericError",
    "DegenerateChannelError",
    "EstimationError",
    "CalibrationError",
    "ChannelEstimate",
    "LeastSquaresChannelEstimator",
    "MmseChannelEstimator",
    "estimation_mse",
    "ls_estimate",
    "mmse_estimate",
    "refine",
    "ExperimentConfig",
    "MetricsRecord",
    "CalibrationResult",
    "calibrate_convention",
    "make_importance",
    "run_chain_once",
    "run_end_to_end",
    "run_equivalent_snr_table",
    "run_estimation_sweep",
    "SvdTriple",
    "diag_extended",
    "hermitian",
    "matmul",
    "pinv",
    "svd",
    "EquivalentSubchannels",
    "MuPrecoder",
    "MuUserPrecoder",
    "SuPrecoder",
    "decompose_user",
    "equivalent_snrs_from_gains",
    "FeatureBlock",
    "ImportanceScheduler",
    "ScheduleMap",
    "mu_assignment",
    "resort",
    "select",
    "sort_by_importance",
    "su_assignment",
    "to_complex_symbols",
    "to_real_features",
]
