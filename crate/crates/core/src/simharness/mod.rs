//! Simulation design: covariance structures, alternatives, size/power
//! tables, pooled null distributions and the projected-dimension study.

pub mod alternatives;
pub mod config;
pub mod experiment;
pub mod sampling;

pub use crate::covariance::{make_sigma, CovarianceSpec};
pub use alternatives::{make_alternative, support_size, AlternativeSpec};
pub use config::{CalibrationMode, ExperimentConfig, ExperimentKind, Method, Scale};
pub use experiment::{
    build_calibrations, k_ratio_experiment, run_power_experiment, run_power_experiment_with,
    KRatioRow, KRatioTable, PowerRow, PowerTable,
};
pub use sampling::{null_draws_under, pooled_null_calibration, sample_dataset};
