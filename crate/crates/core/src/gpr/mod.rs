//! Exact Gaussian-process regression from RSS vectors to position coordinates.
//!
//! Each coordinate gets its own GP with the kernel in [`kernel`]. Targets are
//! centered by their empirical mean before the posterior equations are
//! applied, and the mean is added back to predictions. Hyperparameters are
//! chosen by maximizing the log marginal likelihood with a multi-start
//! Nelder-Mead search in log-parameter space.
//!
//! Fitting costs O(L^3) (dense Cholesky). Prediction reuses the stored factor
//! and weights, O(L^2) per query.

pub mod factor;
pub mod io;
pub mod kernel;
pub mod optimize;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::RssVector;
use crate::error::{Error, Result};
use crate::scenario::Position;

pub use factor::SpdFactor;
pub use kernel::{kernel_eval, kernel_matrix, KernelParams};

use kernel::{sq_dist_and_dot, PairwiseStats};
use optimize::{minimize, SimplexOptions};

/// Lower bound on the fitted noise standard deviation, in meters.
pub const NOISE_STD_FLOOR: f64 = 1e-6;

/// Relative round-off band inside which a negative posterior variance is
/// clamped to zero.
pub const VARIANCE_ROUNDOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    X1,
    X2,
}

impl Coordinate {
    pub const BOTH: [Coordinate; 2] = [Coordinate::X1, Coordinate::X2];

    pub fn of(self, p: Position) -> f64 {
        match self {
            Coordinate::X1 => p.x1,
            Coordinate::X2 => p.x2,
        }
    }

    fn index(self) -> usize {
        match self {
            Coordinate::X1 => 0,
            Coordinate::X2 => 1,
        }
    }
}

/// Fingerprints: RSS vectors measured at known positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<RssVector>,
    positions: Vec<Position>,
    /// Row-major copy of `inputs` for the hot loops.
    flat: Vec<f64>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<RssVector>, positions: Vec<Position>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        if inputs.len() != positions.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), actual: positions.len() });
        }
        let dim = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite fingerprint position {p:?}")));
        }
        let flat = inputs.iter().flat_map(|p| p.values().iter().copied()).collect();
        Ok(TrainingSet { inputs, positions, flat })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Number of antennas, M.
    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[RssVector] {
        &self.inputs
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn targets(&self, coord: Coordinate) -> Vec<f64> {
        self.positions.iter().map(|p| coord.of(*p)).collect()
    }

    pub(crate) fn row(&self, l: usize) -> &[f64] {
        let m = self.dim();
        &self.flat[l * m..(l + 1) * m]
    }

    pub(crate) fn pairwise(&self) -> PairwiseStats {
        PairwiseStats::new(&self.flat, self.len(), self.dim())
    }

    /// Training set with the samples reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        TrainingSet::new(
            order.iter().map(|&i| self.inputs[i].clone()).collect(),
            order.iter().map(|&i| self.positions[i]).collect(),
        )
    }

    fn check_query(&self, p: &RssVector) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: p.len() });
        }
        Ok(())
    }
}

fn centered(targets: &[f64]) -> (f64, Vec<f64>) {
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    (mean, targets.iter().map(|t| t - mean).collect())
}

/// Evidence of centered targets `z` under `C + noise^2 I`, with the factor
/// that was used to compute it.
fn evidence(stats: &PairwiseStats, z: &[f64], k: &KernelParams, noise_std: f64) -> Result<(f64, SpdFactor)> {
    let factor = SpdFactor::new(stats.kernel_matrix(k, noise_std * noise_std))?;
    let z = DVector::from_column_slice(z);
    let v = factor.solve_lower(&z);
    let n = z.len() as f64;
    let lml = -0.5 * v.norm_squared() - 0.5 * factor.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    Ok((lml, factor))
}

/// Log marginal likelihood of one coordinate's mean-centered targets.
pub fn log_marginal_likelihood(
    train: &TrainingSet,
    coord: Coordinate,
    k: &KernelParams,
    noise_std: f64,
) -> Result<f64> {
    k.validate()?;
    if !(noise_std.is_finite() && noise_std > 0.0) {
        return Err(Error::InvalidArgument(format!("noise std must be > 0, got {noise_std}")));
    }
    let (_, z) = centered(&train.targets(coord));
    evidence(&train.pairwise(), &z, k, noise_std).map(|(lml, _)| lml)
}

/// Kernel and noise level for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub kernel: KernelParams,
    pub noise_std: f64,
}

impl Hyperparameters {
    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(Error::InvalidArgument(format!("noise std must be > 0, got {}", self.noise_std)));
        }
        Ok(())
    }

    fn to_log(self) -> [f64; 4] {
        [self.kernel.theta0.ln(), self.kernel.theta1.ln(), self.kernel.theta2.ln(), self.noise_std.ln()]
    }

    fn from_log(u: &[f64]) -> Self {
        Hyperparameters { kernel: KernelParams::new(u[0].exp(), u[1].exp(), u[2].exp()), noise_std: u[3].exp() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Number of search starts per coordinate; the first is the heuristic
    /// initialization, the rest are random log-space perturbations of it.
    pub restarts: usize,
    /// Objective evaluations allowed per start.
    pub max_evals: usize,
    pub seed: u64,
    /// Run the hyperparameter search on a random subset of at most this many
    /// fingerprints. The final factorization always uses the full set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_points: Option<usize>,
    /// Skip the search and use these (x1, x2) hyperparameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<[Hyperparameters; 2]>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { restarts: 5, max_evals: 300, seed: 0, search_points: None, hyperparameters: None }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals == 0 {
            return Err(Error::Config("fit.restarts and fit.max_evals must be >= 1".into()));
        }
        if self.search_points.is_some_and(|n| n < 2) {
            return Err(Error::Config("fit.search_points must be >= 2".into()));
        }
        if let Some(hs) = &self.hyperparameters {
            for h in hs {
                h.validate().map_err(|e| Error::Config(format!("fit.hyperparameters: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Fitted GP posterior machinery for one coordinate.
#[derive(Debug, Clone)]
pub struct CoordinateModel {
    pub hyper: Hyperparameters,
    pub target_mean: f64,
    /// Factor of `C + noise^2 I` (plus jitter, if any was needed).
    pub factor: SpdFactor,
    /// `(C + noise^2 I)^{-1} (targets - target_mean)`.
    pub weights: DVector<f64>,
    pub log_marginal_likelihood: f64,
}

impl CoordinateModel {
    fn build(stats: &PairwiseStats, targets: &[f64], hyper: Hyperparameters, degenerate: bool) -> Result<Self> {
        let (target_mean, mut z) = centered(targets);
        if degenerate {
            z.iter_mut().for_each(|v| *v = 0.0);
        }
        let (lml, factor) = evidence(stats, &z, &hyper.kernel, hyper.noise_std)?;
        let weights = factor.solve(&DVector::from_vec(z));
        Ok(CoordinateModel { hyper, target_mean, factor, weights, log_marginal_likelihood: lml })
    }

    /// Posterior mean and variance given the kernel row against the training
    /// inputs and the prior variance at the query.
    fn posterior(&self, c: &DVector<f64>, prior_var: f64) -> Result<(f64, f64)> {
        let mean = self.target_mean + c.dot(&self.weights);
        let v = self.factor.solve_lower(c);
        let noise_var = self.hyper.noise_std * self.hyper.noise_std;
        let var = noise_var + prior_var - v.norm_squared();
        if var >= 0.0 {
            return Ok((mean, var));
        }
        if var >= -VARIANCE_ROUNDOFF * prior_var.abs().max(f64::MIN_POSITIVE) {
            return Ok((mean, 0.0));
        }
        Err(Error::Numerical(format!("posterior variance {var:e} is negative beyond round-off")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub objective_evals: usize,
    pub starts: usize,
    pub failed_starts: usize,
    pub search_points: usize,
}

#[derive(Debug, Clone)]
pub struct GprModel {
    train: TrainingSet,
    coords: [CoordinateModel; 2],
    pub diagnostics: FitDiagnostics,
}

/// Posterior mean position with per-coordinate variances (m^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: Position,
    pub var_x1: f64,
    pub var_x2: f64,
}

impl Prediction {
    /// `sqrt(var_x1 + var_x2)`, comparable with a 2-D position error.
    pub fn radial_std(&self) -> f64 {
        (self.var_x1 + self.var_x2).sqrt()
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn is_degenerate(targets: &[f64]) -> bool {
    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Heuristic starting point derived from the data scales.
fn initial_guess(stats: &PairwiseStats, targets: &[f64]) -> Hyperparameters {
    let (_, z) = centered(targets);
    let var = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    let theta0 = if var > 0.0 { var } else { 1.0 };
    let med = median(stats.upper_distances());
    let theta1 = if med > 0.0 { 1.0 / (2.0 * med * med) } else { 1.0 };
    let msq = stats.mean_sq_norm();
    let theta2 = if msq > 0.0 { theta0 / msq } else { theta0 };
    let noise_std = (0.1 * var.sqrt()).max(NOISE_STD_FLOOR);
    Hyperparameters { kernel: KernelParams::new(theta0, theta1, theta2), noise_std }
}

/// Log-space search box around the heuristic start.
fn search_bounds(init: &Hyperparameters) -> [(f64, f64); 4] {
    let u = init.to_log();
    let decade = std::f64::consts::LN_10;
    [
        (u[0] - 6.0 * decade, u[0] + 6.0 * decade),
        (u[1] - 6.0 * decade, u[1] + 6.0 * decade),
        (u[2] - 10.0 * decade, u[2] + 4.0 * decade),
        (NOISE_STD_FLOOR.ln(), u[3] + 3.0 * decade),
    ]
}

struct SearchOutcome {
    hyper: Hyperparameters,
    evals: usize,
    failed: usize,
}

fn search_coordinate(
    stats: &PairwiseStats,
    targets: &[f64],
    cfg: &FitConfig,
    coord: Coordinate,
) -> Result<SearchOutcome> {
    let init = initial_guess(stats, targets);
    let bounds = search_bounds(&init);
    let (_, z) = centered(targets);
    let objective = |u: &[f64]| -> f64 {
        if u.iter().zip(&bounds).any(|(v, (lo, hi))| !(*lo..=*hi).contains(v)) {
            return f64::INFINITY;
        }
        let h = Hyperparameters::from_log(u);
        match evidence(stats, &z, &h.kernel, h.noise_std) {
            Ok((lml, _)) => -lml,
            Err(_) => f64::INFINITY,
        }
    };
    let mut rng =
        ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(coord.index() as u64 + 1)));
    let opts = SimplexOptions { max_evals: cfg.max_evals, ..Default::default() };
    let start0 = init.to_log();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let (mut evals, mut failed) = (0, 0);
    for r in 0..cfg.restarts {
        let mut start = start0;
        if r > 0 {
            for (s, (lo, hi)) in start.iter_mut().zip(&bounds) {
                *s = (*s + rng.random_range(-2.0..2.0)).clamp(*lo, *hi);
            }
        }
        let m = minimize(objective, &start, &opts);
        evals += m.evals;
        if !m.value.is_finite() {
            failed += 1;
            continue;
        }
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    match best {
        Some((_, u)) => Ok(SearchOutcome { hyper: Hyperparameters::from_log(&u), evals, failed }),
        None => Err(Error::IllConditionedKernel { max_jitter: factor::JITTER_MAX }),
    }
}

/// Fits one GP per coordinate.
pub fn fit(train: &TrainingSet, cfg: &FitConfig) -> Result<GprModel> {
    cfg.validate()?;
    let stats = train.pairwise();
    let mut diagnostics = FitDiagnostics { search_points: train.len(), ..Default::default() };

    let chosen: [Hyperparameters; 2] = match &cfg.hyperparameters {
        Some(h) => *h,
        None => {
            if train.len() < 2 {
                return Err(Error::InvalidArgument("hyperparameter search needs at least 2 fingerprints".into()));
            }
            let subset: Option<Vec<usize>> = cfg.search_points.filter(|&n| n < train.len()).map(|n| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x005E_A2C4));
                let mut idx = rand::seq::index::sample(&mut rng, train.len(), n).into_vec();
                idx.sort_unstable();
                idx
            });
            let search_stats = subset.as_ref().map(|idx| stats.subset(idx));
            let s = search_stats.as_ref().unwrap_or(&stats);
            diagnostics.search_points = s.len();
            let run = |coord: Coordinate| -> Result<SearchOutcome> {
                let all = train.targets(coord);
                let targets: Vec<f64> = match &subset {
                    Some(idx) => idx.iter().map(|&i| all[i]).collect(),
                    None => all.clone(),
                };
                if is_degenerate(&all) {
                    let mut hyper = initial_guess(s, &targets);
                    hyper.noise_std = NOISE_STD_FLOOR;
                    return Ok(SearchOutcome { hyper, evals: 0, failed: 0 });
                }
                search_coordinate(s, &targets, cfg, coord)
            };
            let (a, b) = rayon::join(|| run(Coordinate::X1), || run(Coordinate::X2));
            let (a, b) = (a?, b?);
            diagnostics.objective_evals = a.evals + b.evals;
            diagnostics.failed_starts = a.failed + b.failed;
            diagnostics.starts = 2 * cfg.restarts;
            [a.hyper, b.hyper]
        }
    };
    let build = |coord: Coordinate| {
        let targets = train.targets(coord);
        CoordinateModel::build(&stats, &targets, chosen[coord.index()], is_degenerate(&targets))
    };
    let (m1, m2) = rayon::join(|| build(Coordinate::X1), || build(Coordinate::X2));
    Ok(GprModel { train: train.clone(), coords: [m1?, m2?], diagnostics })
}

impl GprModel {
    pub fn training_set(&self) -> &TrainingSet {
        &self.train
    }

    pub fn coordinate(&self, coord: Coordinate) -> &CoordinateModel {
        &self.coords[coord.index()]
    }

    pub fn hyperparameters(&self) -> [Hyperparameters; 2] {
        [self.coords[0].hyper, self.coords[1].hyper]
    }

    /// Posterior mean and variance of both coordinates at `p`.
    pub fn predict(&self, p: &RssVector) -> Result<Prediction> {
        self.train.check_query(p)?;
        let q = p.values();
        let (self_sq, self_dot) = sq_dist_and_dot(q, q);
        let pairs: Vec<(f64, f64)> = (0..self.train.len()).map(|l| sq_dist_and_dot(self.train.row(l), q)).collect();
        let mut out = [(0.0, 0.0); 2];
        for (slot, cm) in out.iter_mut().zip(&self.coords) {
            let k = &cm.hyper.kernel;
            let c = DVector::from_iterator(pairs.len(), pairs.iter().map(|&(sq, dot)| k.combine(sq, dot)));
            *slot = cm.posterior(&c, k.combine(self_sq, self_dot))?;
        }
        Ok(Prediction { mean: Position::new(out[0].0, out[1].0), var_x1: out[0].1, var_x2: out[1].1 })
    }
}
