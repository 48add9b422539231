//! Received-signal-strength generation.
//!
//! Two measurement routes are provided. [`sample_rss`] evaluates the
//! multi-slope log-distance model directly and adds Gaussian shadowing in dB.
//! [`simulate_hardened_rss`] goes through the uplink signal model: it draws
//! Rayleigh small-scale fading and unit-power complex noise for every
//! resource element, averages the received power, and removes the noise bias.
//! With enough resource elements the two routes agree in distribution.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{distance, Position, Scenario};

/// One slope of the path-loss curve, valid up to `upper_breakpoint` meters
/// (`None` means unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_breakpoint: Option<f64>,
    pub exponent: f64,
}

/// Multi-slope log-distance path-loss model with log-normal shadowing.
///
/// The curve passes through `reference_power_db` at `reference_distance` and
/// is continuous across breakpoints: every segment starts where the previous
/// one ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub reference_power_db: f64,
    pub reference_distance: f64,
    pub segments: Vec<Segment>,
    pub shadowing_std_db: f64,
}

impl PathLossModel {
    /// Flat below 10 m, exponent 2 up to 50 m, 4 beyond; 0 dB at 10 m and
    /// 5 dB shadowing.
    pub fn three_slope_urban() -> Self {
        PathLossModel {
            reference_power_db: 0.0,
            reference_distance: 10.0,
            segments: vec![
                Segment { upper_breakpoint: Some(10.0), exponent: 0.0 },
                Segment { upper_breakpoint: Some(50.0), exponent: 2.0 },
                Segment { upper_breakpoint: None, exponent: 4.0 },
            ],
            shadowing_std_db: 5.0,
        }
    }

    pub fn with_shadowing(mut self, std_db: f64) -> Self {
        self.shadowing_std_db = std_db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("path-loss model: {msg}")));
        if !(self.reference_distance.is_finite() && self.reference_distance > 0.0) {
            return bad(format!("reference distance must be > 0, got {}", self.reference_distance));
        }
        if !self.reference_power_db.is_finite() {
            return bad("reference power must be finite".into());
        }
        if !(self.shadowing_std_db.is_finite() && self.shadowing_std_db >= 0.0) {
            return bad(format!("shadowing std must be >= 0, got {}", self.shadowing_std_db));
        }
        let Some((last, inner)) = self.segments.split_last() else {
            return bad("at least one segment is required".into());
        };
        if last.upper_breakpoint.is_some() {
            return bad("the last segment must be unbounded".into());
        }
        let mut prev = 0.0;
        for seg in inner {
            match seg.upper_breakpoint {
                None => return bad("only the last segment may be unbounded".into()),
                Some(b) if !(b.is_finite() && b > prev) => {
                    return bad(format!("breakpoints must be strictly increasing and > 0, got {b}"))
                }
                Some(b) => prev = b,
            }
        }
        if let Some(seg) = self.segments.iter().find(|s| !(0.0..=6.0).contains(&s.exponent)) {
            return bad(format!("exponent {} outside [0, 6]", seg.exponent));
        }
        Ok(())
    }

    /// Cumulative loss in dB relative to an internal anchor. Only
    /// differences of this function are meaningful.
    fn relative_loss_db(&self, d: f64) -> f64 {
        let first = self.segments[0];
        let first_end = first.upper_breakpoint.unwrap_or(f64::INFINITY);
        if d <= first_end {
            if first.exponent == 0.0 {
                return 0.0;
            }
            let anchor = if first_end.is_finite() { first_end } else { 1.0 };
            return 10.0 * first.exponent * (d / anchor).log10();
        }
        let mut loss = 0.0;
        let mut start = first_end;
        for seg in &self.segments[1..] {
            let end = seg.upper_breakpoint.unwrap_or(f64::INFINITY);
            loss += 10.0 * seg.exponent * (d.min(end) / start).log10();
            if d <= end {
                break;
            }
            start = end;
        }
        loss
    }
}

/// Deterministic part of the path-loss model: mean received power in dB at
/// distance `d` meters.
///
/// `d = 0` is accepted only when the innermost segment has exponent 0, where
/// the curve is flat and the value is finite.
pub fn mean_path_gain_db(d: f64, model: &PathLossModel) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be >= 0, got {d}")));
    }
    if d == 0.0 && model.segments.first().is_none_or(|s| s.exponent != 0.0) {
        return Err(Error::DegenerateGeometry("zero link distance with a non-flat innermost path-loss segment".into()));
    }
    Ok(model.reference_power_db - (model.relative_loss_db(d) - model.relative_loss_db(model.reference_distance)))
}

/// Per-antenna received signal strengths in dB, ordered like `Scenario::antennas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RssVector(Vec<f64>);

impl RssVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("RSS vector must not be empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("RSS entry {i} is not finite")));
        }
        Ok(RssVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_terminal(mt: Position, scenario: &Scenario) -> Result<()> {
    if !mt.is_finite() || !scenario.region().contains(mt) {
        return Err(Error::InvalidArgument(format!("terminal {mt:?} lies outside the area")));
    }
    Ok(())
}

fn link_gain_db(mt: Position, antenna: Position, model: &PathLossModel) -> Result<f64> {
    mean_path_gain_db(distance(mt, antenna), model).map_err(|e| match e {
        Error::DegenerateGeometry(_) => {
            Error::DegenerateGeometry(format!("terminal {mt:?} coincides with antenna {antenna:?}"))
        }
        other => other,
    })
}

/// Large-scale RSS at `mt`: mean path gain plus fresh i.i.d. Gaussian
/// shadowing for every antenna.
pub fn sample_rss<R: Rng + ?Sized>(
    mt: Position,
    scenario: &Scenario,
    model: &PathLossModel,
    rng: &mut R,
) -> Result<RssVector> {
    check_terminal(mt, scenario)?;
    let values = scenario
        .antennas
        .iter()
        .map(|&a| {
            let z: f64 = rng.sample(StandardNormal);
            Ok(link_gain_db(mt, a, model)? + model.shadowing_std_db * z)
        })
        .collect::<Result<Vec<_>>>()?;
    RssVector::new(values)
}

/// Parameters of the resource-element simulation behind [`simulate_hardened_rss`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalLayerSpec {
    /// Linear SNR at the terminal.
    pub snr: f64,
    pub subcarriers: usize,
    pub symbols: usize,
    /// Linear lower bound applied to the bias-corrected power estimate.
    pub clamp_floor: f64,
    /// Draw `h ~ CN(0, 1)`; when false `h = 1`.
    pub rayleigh_fading: bool,
    /// Add `w ~ CN(0, 1)`; when false the receiver is noise-free.
    pub receiver_noise: bool,
}

impl Default for PhysicalLayerSpec {
    fn default() -> Self {
        PhysicalLayerSpec {
            snr: 1e3,
            subcarriers: 100,
            symbols: 10,
            clamp_floor: 1e-12,
            rayleigh_fading: true,
            receiver_noise: true,
        }
    }
}

impl PhysicalLayerSpec {
    pub fn resource_elements(&self) -> usize {
        self.subcarriers * self.symbols
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::InvalidArgument(format!("snr must be > 0, got {}", self.snr)));
        }
        if self.subcarriers == 0 || self.symbols == 0 {
            return Err(Error::InvalidArgument("subcarriers and symbols must be >= 1".into()));
        }
        if !(self.clamp_floor.is_finite() && self.clamp_floor > 0.0) {
            return Err(Error::InvalidArgument("clamp floor must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardenedRss {
    pub rss: RssVector,
    /// Antennas whose estimate fell below the clamp floor.
    pub clamped: usize,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// RSS estimated from `N_sub * N_slot` received pilot samples per antenna.
///
/// Shadowing is drawn once per antenna. Each resource element receives
/// `sqrt(snr) * h * sqrt(beta) + w` for a unit pilot; the average power minus
/// the noise power, divided by the SNR, estimates `beta`.
pub fn simulate_hardened_rss<R: Rng + ?Sized>(
    mt: Position,
    scenario: &Scenario,
    model: &PathLossModel,
    phy: &PhysicalLayerSpec,
    rng: &mut R,
) -> Result<HardenedRss> {
    phy.validate()?;
    check_terminal(mt, scenario)?;
    let n_c = phy.resource_elements();
    let amp = phy.snr.sqrt();
    let noise_power = if phy.receiver_noise { 1.0 } else { 0.0 };
    let mut clamped = 0;
    let mut values = Vec::with_capacity(scenario.antennas.len());
    for &antenna in &scenario.antennas {
        let z: f64 = rng.sample(StandardNormal);
        let beta_db = link_gain_db(mt, antenna, model)? + model.shadowing_std_db * z;
        let g = amp * 10f64.powf(beta_db / 20.0);
        let mut power = 0.0;
        for _ in 0..n_c {
            let (h_re, h_im) = if phy.rayleigh_fading { complex_normal(rng) } else { (1.0, 0.0) };
            let (w_re, w_im) = if phy.receiver_noise { complex_normal(rng) } else { (0.0, 0.0) };
            let (y_re, y_im) = (g * h_re + w_re, g * h_im + w_im);
            power += y_re * y_re + y_im * y_im;
        }
        let mut beta = (power / n_c as f64 - noise_power) / phy.snr;
        if beta < phy.clamp_floor {
            beta = phy.clamp_floor;
            clamped += 1;
        }
        values.push(10.0 * beta.log10());
    }
    Ok(HardenedRss { rss: RssVector::new(values)?, clamped })
}
