//! Weighted k-nearest-neighbour fingerprinting.

use serde::{Deserialize, Serialize};

use crate::channel::RssVector;
use crate::error::{Error, Result};
use crate::gpr::TrainingSet;
use crate::scenario::Position;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub kappa: usize,
    /// Squared signal distance (dB^2) below which a fingerprint counts as an exact match.
    pub zero_distance_epsilon: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { kappa: 4, zero_distance_epsilon: 1e-12 }
    }
}

impl KnnConfig {
    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.kappa = kappa;
        self
    }
}

/// Inverse-squared-distance weighted mean of the `kappa` fingerprints closest
/// to `p` in signal space. Ties at equal distance go to the lower index.
pub fn knn_locate(train: &TrainingSet, p: &RssVector, cfg: &KnnConfig) -> Result<Position> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("kNN needs a non-empty training set".into()));
    }
    if cfg.kappa == 0 || cfg.kappa > train.len() {
        return Err(Error::InvalidArgument(format!("kappa = {} must lie in 1..={}", cfg.kappa, train.len())));
    }
    if p.len() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), actual: p.len() });
    }
    let q = p.values();
    let d2: Vec<f64> =
        (0..train.len()).map(|l| train.row(l).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
    let positions = train.positions();
    if let Some(l) = d2.iter().position(|d| *d < cfg.zero_distance_epsilon) {
        return Ok(positions[l]);
    }
    let mut order: Vec<usize> = (0..d2.len()).collect();
    // stable sort keeps lower indices first among equal distances
    order.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]));
    let (mut w_sum, mut x1, mut x2) = (0.0, 0.0, 0.0);
    for &l in &order[..cfg.kappa] {
        let w = 1.0 / d2[l];
        w_sum += w;
        x1 += w * positions[l].x1;
        x2 += w * positions[l].x2;
    }
    Ok(Position::new(x1 / w_sum, x2 / w_sum))
}
