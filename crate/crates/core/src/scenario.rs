//! Deployment geometry: antenna layouts, terminal positions and fingerprint grids.
//!
//! Everything here is deterministic. Grids are filled row-major (the first
//! coordinate varies fastest) with a half-cell margin to the region edges.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the deployment plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x1: f64,
    pub x2: f64,
}

impl Position {
    pub fn new(x1: f64, x2: f64) -> Self {
        Position { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

/// Euclidean distance in the plane.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x1 - b.x1).hypot(a.x2 - b.x2)
}

/// Axis-aligned rectangle `[x1_min, x1_max] x [x2_min, x2_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Region {
    pub fn new(x1_min: f64, x1_max: f64, x2_min: f64, x2_max: f64) -> Self {
        Region { x1_min, x1_max, x2_min, x2_max }
    }

    /// `[0, width] x [0, height]`.
    pub fn from_size(width: f64, height: f64) -> Self {
        Region::new(0.0, width, 0.0, height)
    }

    pub fn width(&self) -> f64 {
        self.x1_max - self.x1_min
    }

    pub fn height(&self) -> f64 {
        self.x2_max - self.x2_min
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x1 >= self.x1_min && p.x1 <= self.x1_max && p.x2 >= self.x2_min && p.x2 <= self.x2_max
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x1_min, self.x1_max, self.x2_min, self.x2_max].iter().all(|v| v.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::InvalidArgument(format!("region {self:?} has zero or negative area")));
        }
        Ok(())
    }
}

/// Evenly spaced grid of exactly `count` points inside `region`.
///
/// The grid has `ceil(sqrt(count))` columns and as many rows as needed; the
/// last row is truncated when `count` is not a perfect square.
pub fn make_grid(count: usize, region: Region) -> Result<Vec<Position>> {
    if count == 0 {
        return Err(Error::InvalidArgument("grid point count must be >= 1".into()));
    }
    region.validate()?;
    let cols = (count as f64).sqrt().ceil() as usize;
    // ceil() of a float sqrt can land one short for huge counts.
    let cols = if cols * cols < count { cols + 1 } else { cols };
    let rows = count.div_ceil(cols);
    let dx = region.width() / cols as f64;
    let dy = region.height() / rows as f64;
    let points = (0..count)
        .map(|idx| {
            let (row, col) = (idx / cols, idx % cols);
            Position::new(region.x1_min + (col as f64 + 0.5) * dx, region.x2_min + (row as f64 + 0.5) * dy)
        })
        .collect();
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "positions")]
pub enum AntennaLayout {
    /// Grid inside a centered square of side `compact_fraction * min(width, height)`.
    CompactGrid,
    /// Grid over the full deployment area.
    SpreadGrid,
    Explicit(Vec<Position>),
}

impl AntennaLayout {
    pub fn label(&self) -> &'static str {
        match self {
            AntennaLayout::CompactGrid => "compact",
            AntennaLayout::SpreadGrid => "spread",
            AntennaLayout::Explicit(_) => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSpec {
    pub area_width: f64,
    pub area_height: f64,
    pub antenna_layout: AntennaLayout,
    pub antenna_count: usize,
    pub terminal_count: usize,
    pub fingerprint_count: usize,
    pub compact_fraction: f64,
}

impl Default for DeploymentSpec {
    fn default() -> Self {
        DeploymentSpec {
            area_width: 100.0,
            area_height: 100.0,
            antenna_layout: AntennaLayout::SpreadGrid,
            antenna_count: 36,
            terminal_count: 25,
            fingerprint_count: 400,
            compact_fraction: 0.2,
        }
    }
}

impl DeploymentSpec {
    pub fn area(&self) -> Region {
        Region::from_size(self.area_width, self.area_height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area_width.is_finite() && self.area_width > 0.0)
            || !(self.area_height.is_finite() && self.area_height > 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "area must be positive, got {} x {}",
                self.area_width, self.area_height
            )));
        }
        if self.antenna_count == 0 || self.terminal_count == 0 || self.fingerprint_count == 0 {
            return Err(Error::InvalidArgument("antenna, terminal and fingerprint counts must all be >= 1".into()));
        }
        if !(self.compact_fraction > 0.0 && self.compact_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "compact_fraction must lie in (0, 1], got {}",
                self.compact_fraction
            )));
        }
        if let AntennaLayout::Explicit(list) = &self.antenna_layout {
            if list.len() != self.antenna_count {
                return Err(Error::InvalidArgument(format!(
                    "explicit layout lists {} antennas but antenna_count is {}",
                    list.len(),
                    self.antenna_count
                )));
            }
            let area = self.area();
            if let Some(p) = list.iter().find(|p| !p.is_finite() || !area.contains(**p)) {
                return Err(Error::InvalidArgument(format!("explicit antenna {p:?} lies outside the area")));
            }
        }
        Ok(())
    }
}

/// Area size stored alongside a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub area: Area,
    pub antennas: Vec<Position>,
    pub terminals: Vec<Position>,
    pub fingerprint_sites: Vec<Position>,
}

/// Lays out antennas, terminals and fingerprint sites for `spec`.
///
/// All current layouts are deterministic grids; `_rng_seed` is accepted so
/// randomized layouts can be added without changing callers.
pub fn build_scenario(spec: &DeploymentSpec, _rng_seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let area = spec.area();
    let antennas = match &spec.antenna_layout {
        AntennaLayout::SpreadGrid => make_grid(spec.antenna_count, area)?,
        AntennaLayout::CompactGrid => {
            let side = spec.compact_fraction * spec.area_width.min(spec.area_height);
            let (c1, c2) = (spec.area_width / 2.0, spec.area_height / 2.0);
            let sub = Region::new(c1 - side / 2.0, c1 + side / 2.0, c2 - side / 2.0, c2 + side / 2.0);
            make_grid(spec.antenna_count, sub)?
        }
        AntennaLayout::Explicit(list) => list.clone(),
    };
    Ok(Scenario {
        area: Area { width: spec.area_width, height: spec.area_height },
        antennas,
        terminals: make_grid(spec.terminal_count, area)?,
        fingerprint_sites: make_grid(spec.fingerprint_count, area)?,
    })
}

impl Scenario {
    pub fn region(&self) -> Region {
        Region::from_size(self.area.width, self.area.height)
    }

    pub fn validate(&self) -> Result<()> {
        let region = self.region();
        region.validate()?;
        if self.antennas.is_empty() || self.terminals.is_empty() || self.fingerprint_sites.is_empty() {
            return Err(Error::InvalidArgument("scenario has an empty position list".into()));
        }
        let all = self.antennas.iter().chain(&self.terminals).chain(&self.fingerprint_sites);
        for p in all {
            if !p.is_finite() || !region.contains(*p) {
                return Err(Error::InvalidArgument(format!(
                    "position {p:?} lies outside the {}x{} area",
                    self.area.width, self.area.height
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        scenario.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(scenario)
    }
}
