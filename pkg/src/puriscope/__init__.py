"""Desk-scale lab for purification-assisted quantum state and channel learning."""

from .core import (
    DensityMatrix,
    Observable,
    PureState,
    SchmidtDecomposition,
    SpectralDecomposition,
    eigh,
    fidelity,
    matrix_power_trace,
    partial_trace,
    schmidt_decompose,
    trace_distance,
    trace_norm,
)
from .ensembles import (
    EnsembleFamily,
    EnsembleSpec,
    LabeledSample,
    analytic_mean_purity,
    child_rng,
    classical_correlate,
    haar_state,
    haar_unitary,
    purify,
    sample_ensemble,
    verification_state,
)
from .measurement import (
    ShotBudget,
    TomographyResult,
    measure_in_basis,
    measure_observable,
    randomized_measurement_purity,
    tomography,
)
from .estimators import (
    PurificationIdentity,
    QfiTermTable,
    estimate_moment,
    estimate_pca,
    estimate_qfi,
    estimate_virtual_cooling,
    oracle_identity_check,
    qfi_oracle,
)
from .baselines import (
    DistinguishResult,
    distinguish_experiment,
    single_copy_purity_attack,
    swap_test_moment,
    wilson_interval,
)
from .channels import (
    QuantumChannel,
    StinespringIsometry,
    amplitude_damping_channel,
    canonicalize,
    channel_pca_estimate,
    depolarizing_channel,
    random_channel,
    unitarity_estimate,
    unitary_channel,
    virtual_distillation_estimate,
)
from .crypto import (
    BlindEstimationResult,
    ServerKind,
    ServerModel,
    TranscriptEntry,
    make_test_observables,
    run_blind_estimation,
    run_test_observable_audit,
    run_verification,
)
from .reports import EstimatorReport

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "Observable",
    "PureState",
    "SchmidtDecomposition",
    "SpectralDecomposition",
    "eigh",
    "fidelity",
    "matrix_power_trace",
    "partial_trace",
    "schmidt_decompose",
    "trace_distance",
    "trace_norm",
    "EnsembleFamily",
    "EnsembleSpec",
    "LabeledSample",
    "analytic_mean_purity",
    "child_rng",
    "classical_correlate",
    "haar_state",
    "haar_unitary",
    "purify",
    "sample_ensemble",
    "verification_state",
    "ShotBudget",
    "TomographyResult",
    "measure_in_basis",
    "measure_observable",
    "randomized_measurement_purity",
    "tomography",
    "PurificationIdentity",
    "QfiTermTable",
    "estimate_moment",
    "estimate_pca",
    "estimate_qfi",
    "estimate_virtual_cooling",
    "oracle_identity_check",
    "qfi_oracle",
    "DistinguishResult",
    "distinguish_experiment",
    "single_copy_purity_attack",
    "swap_test_moment",
    "wilson_interval",
    "QuantumChannel",
    "StinespringIsometry",
    "amplitude_damping_channel",
    "canonicalize",
    "channel_pca_estimate",
    "depolarizing_channel",
    "random_channel",
    "unitarity_estimate",
    "unitary_channel",
    "virtual_distillation_estimate",
    "BlindEstimationResult",
    "ServerKind",
    "ServerModel",
    "TranscriptEntry",
    "make_test_observables",
    "run_blind_estimation",
    "run_test_observable_audit",
    "run_verification",
    "EstimatorReport",
]
