//! Model files.
//!
//! A model file stores, per coordinate, the hyperparameters, the target mean
//! and the log marginal likelihood reached during fitting, plus the full
//! training set. The factorization and weights are recomputed on load and the
//! recomputed evidence must match the stored one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    kernel::PairwiseStats, Coordinate, CoordinateModel, FitDiagnostics, GprModel, Hyperparameters, TrainingSet,
};
use crate::channel::RssVector;
use crate::error::{Error, Result};
use crate::scenario::Position;

pub const MODEL_FORMAT: &str = "mimo-fp-gpr/1";

/// Allowed drift of the recomputed evidence (absolute, scaled by `max(1, |lml|)`).
pub const RELOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fingerprint {
    pub x1: f64,
    pub x2: f64,
    pub rss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinateRecord {
    pub coordinate: Coordinate,
    #[serde(flatten)]
    pub hyper: Hyperparameters,
    pub target_mean: f64,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub antennas: usize,
    pub coordinates: Vec<CoordinateRecord>,
    pub diagnostics: FitDiagnostics,
    pub fingerprints: Vec<Fingerprint>,
}

impl GprModel {
    pub fn to_file(&self) -> ModelFile {
        let coordinates = Coordinate::BOTH
            .iter()
            .map(|&c| {
                let cm = self.coordinate(c);
                CoordinateRecord {
                    coordinate: c,
                    hyper: cm.hyper,
                    target_mean: cm.target_mean,
                    jitter: cm.factor.jitter,
                    log_marginal_likelihood: cm.log_marginal_likelihood,
                }
            })
            .collect();
        let t = self.training_set();
        let fingerprints = t
            .inputs()
            .iter()
            .zip(t.positions())
            .map(|(p, pos)| Fingerprint { x1: pos.x1, x2: pos.x2, rss: p.values().to_vec() })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.into(),
            antennas: t.dim(),
            coordinates,
            diagnostics: self.diagnostics.clone(),
            fingerprints,
        }
    }

    /// Rebuilds the posterior machinery from a model file.
    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!("unsupported model format {:?}", file.format)));
        }
        let mut inputs = Vec::with_capacity(file.fingerprints.len());
        let mut positions = Vec::with_capacity(file.fingerprints.len());
        for (row, fp) in file.fingerprints.into_iter().enumerate() {
            if fp.rss.len() != file.antennas {
                return Err(Error::InvalidArgument(format!(
                    "fingerprint {row} has {} RSS values, model declares {} antennas",
                    fp.rss.len(),
                    file.antennas
                )));
            }
            inputs.push(RssVector::new(fp.rss)?);
            positions.push(Position::new(fp.x1, fp.x2));
        }
        let train = TrainingSet::new(inputs, positions)?;
        let stats: PairwiseStats = train.pairwise();
        let mut coords = Vec::with_capacity(2);
        for c in Coordinate::BOTH {
            let rec = file
                .coordinates
                .iter()
                .find(|r| r.coordinate == c)
                .ok_or_else(|| Error::InvalidArgument(format!("model file lacks coordinate {c:?}")))?;
            rec.hyper.validate()?;
            let targets = train.targets(c);
            let cm = CoordinateModel::build(&stats, &targets, rec.hyper, super::is_degenerate(&targets))?;
            let drift = (cm.log_marginal_likelihood - rec.log_marginal_likelihood).abs();
            if drift > RELOAD_TOLERANCE * rec.log_marginal_likelihood.abs().max(1.0) {
                return Err(Error::Numerical(format!(
                    "reloaded evidence for {c:?} is {} but the file records {}",
                    cm.log_marginal_likelihood, rec.log_marginal_likelihood
                )));
            }
            coords.push(cm);
        }
        let [m1, m2]: [CoordinateModel; 2] = coords.try_into().expect("two coordinates");
        Ok(GprModel { train, coords: [m1, m2], diagnostics: file.diagnostics })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file()).expect("model serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        GprModel::from_file(file).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse(path, m),
            other => other,
        })
    }
}
