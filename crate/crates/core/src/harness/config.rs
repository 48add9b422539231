//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::KnnConfig;
use crate::channel::{PathLossModel, PhysicalLayerSpec};
use crate::error::{Error, Result};
use crate::gpr::FitConfig;
use crate::scenario::{AntennaLayout, DeploymentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutVariant {
    Spread,
    Compact,
}

impl LayoutVariant {
    pub fn label(self) -> &'static str {
        match self {
            LayoutVariant::Spread => "spread",
            LayoutVariant::Compact => "compact",
        }
    }

    pub(crate) fn id(self) -> u64 {
        match self {
            LayoutVariant::Spread => 0,
            LayoutVariant::Compact => 1,
        }
    }

    pub fn antenna_layout(self) -> AntennaLayout {
        match self {
            LayoutVariant::Spread => AntennaLayout::SpreadGrid,
            LayoutVariant::Compact => AntennaLayout::CompactGrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    Gpr,
    Knn,
    Both,
}

impl EstimatorChoice {
    pub fn gpr(self) -> bool {
        matches!(self, EstimatorChoice::Gpr | EstimatorChoice::Both)
    }

    pub fn knn(self) -> bool {
        matches!(self, EstimatorChoice::Knn | EstimatorChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Large-scale model evaluated directly.
    Hardened,
    /// Resource-element simulation with fading, noise and averaging.
    Physical,
}

/// When GP hyperparameters are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperparameterPolicy {
    /// Once per cell on an independent pilot fingerprint draw; every run
    /// then refactorizes with those hyperparameters on its own fingerprints.
    PerCell,
    /// Full search on every run's fingerprints.
    PerRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    pub area_width: f64,
    pub area_height: f64,
    pub terminal_count: usize,
    pub compact_fraction: f64,
    pub layouts: Vec<LayoutVariant>,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig {
            area_width: 100.0,
            area_height: 100.0,
            terminal_count: 25,
            compact_fraction: 0.2,
            layouts: vec![LayoutVariant::Spread, LayoutVariant::Compact],
        }
    }
}

impl DeploymentConfig {
    pub fn spec(&self, layout: LayoutVariant, antennas: usize, fingerprints: usize) -> DeploymentSpec {
        DeploymentSpec {
            area_width: self.area_width,
            area_height: self.area_height,
            antenna_layout: layout.antenna_layout(),
            antenna_count: antennas,
            terminal_count: self.terminal_count,
            fingerprint_count: fingerprints,
            compact_fraction: self.compact_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub num_mc_runs: usize,
    pub antenna_counts: Vec<usize>,
    pub fingerprint_counts: Vec<usize>,
    pub estimator: EstimatorChoice,
    pub channel_mode: ChannelMode,
    pub hyperparameters: HyperparameterPolicy,
    /// Write measured seconds into the `wall_s` column. Off by default so
    /// results files are reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
    pub deployment: DeploymentConfig,
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub knn: KnnConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub phy: PhysicalLayerSpec,
}

impl Default for ExperimentConfig {
    /// Desk-scale version of the three-slope study: 50 runs, both estimators.
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 2015,
            num_mc_runs: 50,
            antenna_counts: vec![36, 64, 100],
            fingerprint_counts: vec![25, 100, 225, 400, 625],
            estimator: EstimatorChoice::Both,
            channel_mode: ChannelMode::Hardened,
            hyperparameters: HyperparameterPolicy::PerCell,
            record_wall_time: false,
            deployment: DeploymentConfig::default(),
            path_loss: PathLossModel::three_slope_urban(),
            knn: KnnConfig::default(),
            fit: FitConfig { search_points: Some(225), ..FitConfig::default() },
            phy: PhysicalLayerSpec::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["full", "desk"];

impl ExperimentConfig {
    /// Full-size study: 200 runs, GPR only, both layouts.
    pub fn full_study() -> Self {
        ExperimentConfig { num_mc_runs: 200, estimator: EstimatorChoice::Gpr, ..ExperimentConfig::default() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            // "paper-fig2" is kept as an alias of "full"
            "full" | "paper-fig2" => Ok(Self::full_study()),
            "desk" => Ok(Self::default()),
            other => Err(Error::Config(format!("unknown preset {other:?} (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.num_mc_runs == 0 {
            return cfg("num_mc_runs must be >= 1".into());
        }
        if self.antenna_counts.is_empty() || self.fingerprint_counts.is_empty() || self.deployment.layouts.is_empty() {
            return cfg("antenna_counts, fingerprint_counts and deployment.layouts must be non-empty".into());
        }
        for &m in &self.antenna_counts {
            for &l in &self.fingerprint_counts {
                for &layout in &self.deployment.layouts {
                    self.deployment
                        .spec(layout, m, l)
                        .validate()
                        .map_err(|e| Error::Config(format!("deployment: {e}")))?;
                }
            }
        }
        self.path_loss.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fit.validate()?;
        if self.estimator.gpr() && self.fit.hyperparameters.is_none() && self.fingerprint_counts.contains(&1) {
            return cfg("GPR hyperparameter search needs at least 2 fingerprints".into());
        }
        if self.estimator.knn() {
            if self.knn.kappa == 0 {
                return cfg("knn.kappa must be >= 1".into());
            }
            if let Some(&l) = self.fingerprint_counts.iter().find(|&&l| l < self.knn.kappa) {
                return cfg(format!("knn.kappa = {} exceeds fingerprint count {l}", self.knn.kappa));
            }
        }
        if self.channel_mode == ChannelMode::Physical {
            self.phy.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for cfg in [ExperimentConfig::default(), ExperimentConfig::full_study()] {
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ExperimentConfig::default().to_toml();
        text = text.replacen("num_mc_runs", "bogus_key = 3\nnum_mc_runs", 1);
        let e = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("bogus_key")), "{e}");
        let text = ExperimentConfig::default().to_toml().replacen("[fit]", "[fit]\nwhatever = 1", 1);
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            ExperimentConfig { num_mc_runs: 0, ..Default::default() },
            ExperimentConfig { antenna_counts: vec![], ..Default::default() },
            ExperimentConfig { fingerprint_counts: vec![2, 100], ..Default::default() },
            ExperimentConfig {
                deployment: DeploymentConfig { compact_fraction: 0.0, ..Default::default() },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn presets() {
        let p = ExperimentConfig::preset("full").unwrap();
        assert_eq!(ExperimentConfig::preset("paper-fig2").unwrap(), p);
        assert_eq!(p.num_mc_runs, 200);
        assert_eq!(p.antenna_counts, vec![36, 64, 100]);
        assert_eq!(p.deployment.terminal_count, 25);
        assert_eq!(p.path_loss.shadowing_std_db, 5.0);
        assert!(ExperimentConfig::preset("nope").is_err());
    }
}
