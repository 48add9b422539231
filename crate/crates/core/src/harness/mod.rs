//! Configuration, seeding, file formats and the Monte-Carlo experiment engine.

pub mod config;
pub mod experiment;
pub mod fingerprints;
pub mod seeds;

pub use config::{
    ChannelMode, DeploymentConfig, EstimatorChoice, ExperimentConfig, HyperparameterPolicy, LayoutVariant,
};
pub use experiment::{
    aggregate_rmse, collect_fingerprints, manifest_path, results_csv, rmse, run_experiment, run_single_trial,
    sweep_csv, sweep_knn, CellReport, ChannelSetup, Collected, ExperimentOutput, ResultRow, SweepRow, TrialErrors,
    TrialModels, RESULTS_HEADER, SWEEP_HEADER,
};
pub use fingerprints::{fingerprints_from_csv, fingerprints_to_csv, load_fingerprints, save_fingerprints};
