//! RSS fingerprint positioning for distributed massive-MIMO deployments.
//!
//! A terminal's position is estimated from the received signal strength it
//! produces at every antenna. Two estimators are provided: per-coordinate
//! Gaussian process regression ([`gpr`]) and weighted kNN ([`baselines`]).

pub mod baselines;
pub mod channel;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod scenario;

pub use baselines::{knn_locate, KnnConfig};
pub use channel::{mean_path_gain_db, sample_rss, simulate_hardened_rss, PathLossModel, PhysicalLayerSpec, RssVector};
pub use error::{Error, Result};
pub use gpr::{fit, FitConfig, GprModel, Hyperparameters, KernelParams, Prediction, TrainingSet};
pub use scenario::{build_scenario, make_grid, AntennaLayout, DeploymentSpec, Position, Region, Scenario};
