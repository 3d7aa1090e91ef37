"""Unsupervised per-DoF contact probability with a gated base state estimator."""

from .accel import NUMBA_ENABLED
from .fcm import FcmConfig, FcmModel, fit, membership, update_means, cost
from .features import (
    DOF_NAMES,
    ImuSample,
    NormalizationStats,
    SampleHistory,
    WrenchSample,
    build_window,
    fit_stats,
    preprocess,
    window_matrix,
)
from .contact import (
    ContactModel,
    DofContactModel,
    StreamingContactEstimator,
    estimate_probability,
    estimate_probability_wrench_only,
    in_contact,
    label_contact_cluster,
    load_model,
    probability_series,
    save_model,
    train,
)
from .scenario import (
    GaitScript,
    GroundTruthLog,
    PhysicsConfig,
    SlipEpisode,
    SurfaceSpec,
    check_constraints,
    contact_wrench,
    fast_gait,
    flat_terrain,
    mixed_gait,
    patch_terrain,
    rough_terrain,
    run_scenario,
    slow_gait,
)
from .sensors import (
    BiasState,
    NoiseSpec,
    SensorLog,
    corrupt_imu,
    corrupt_log,
    corrupt_wrench,
    step_bias,
)
from .estimator import (
    BaseState,
    EstimatorConfig,
    FilterResult,
    MeasurementNoise,
    evaluate_errors,
    fixed_threshold_contact,
    modulate_covariance,
    predict,
    rmse,
    run_filter,
    transform_covariance,
    update_foot,
)

__version__ = "0.1.0"
