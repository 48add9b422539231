//! Monte-Carlo positioning experiments over a grid of (layout, M, L) cells.
//!
//! Each cell owns a scenario. Every run draws fresh fingerprints at all sites
//! from its own derived seed and fresh test measurements at all terminals from
//! a seed shared by every L of the same (layout, M, run),
//! fits or configures the estimators, and records squared position errors.
//! Runs are independent tasks; results are assembled in grid order, so the
//! output does not depend on the number of workers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ChannelMode, ExperimentConfig, HyperparameterPolicy, LayoutVariant};
use super::seeds;
use crate::baselines::{knn_locate, KnnConfig};
use crate::channel::{sample_rss, simulate_hardened_rss, PathLossModel, PhysicalLayerSpec, RssVector};
use crate::error::{Error, Result};
use crate::gpr::{fit, FitConfig, GprModel, Hyperparameters, TrainingSet};
use crate::scenario::{build_scenario, Position, Scenario};

/// Root-mean-square 2-D position error.
pub fn rmse(estimates: &[Position], truths: &[Position]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch { expected: truths.len(), actual: estimates.len() });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty sample".into()));
    }
    let sum: f64 = estimates.iter().zip(truths).map(|(e, t)| squared_error(*e, *t)).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

fn squared_error(a: Position, b: Position) -> f64 {
    let (d1, d2) = (a.x1 - b.x1, a.x2 - b.x2);
    d1 * d1 + d2 * d2
}

/// How measurements are produced.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSetup<'a> {
    pub model: &'a PathLossModel,
    pub mode: ChannelMode,
    pub phy: &'a PhysicalLayerSpec,
}

impl<'a> ChannelSetup<'a> {
    pub fn from_config(cfg: &'a ExperimentConfig) -> Self {
        ChannelSetup { model: &cfg.path_loss, mode: cfg.channel_mode, phy: &cfg.phy }
    }

    /// One RSS vector at `pos` and the number of clamped antennas.
    pub fn measure(&self, pos: Position, scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<(RssVector, usize)> {
        match self.mode {
            ChannelMode::Hardened => Ok((sample_rss(pos, scenario, self.model, rng)?, 0)),
            ChannelMode::Physical => {
                let out = simulate_hardened_rss(pos, scenario, self.model, self.phy, rng)?;
                Ok((out.rss, out.clamped))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Collected {
    pub train: TrainingSet,
    pub skipped_sites: usize,
    pub clamped: usize,
}

/// Measures one fingerprint at every site, skipping degenerate sites.
pub fn collect_fingerprints(scenario: &Scenario, ch: &ChannelSetup, rng: &mut ChaCha8Rng) -> Result<Collected> {
    collect_at(&scenario.fingerprint_sites, scenario, ch, rng)
}

fn collect_at(sites: &[Position], scenario: &Scenario, ch: &ChannelSetup, rng: &mut ChaCha8Rng) -> Result<Collected> {
    let mut inputs = Vec::with_capacity(sites.len());
    let mut positions = Vec::with_capacity(sites.len());
    let (mut skipped_sites, mut clamped) = (0, 0);
    for &site in sites {
        match ch.measure(site, scenario, rng) {
            Ok((rss, c)) => {
                inputs.push(rss);
                positions.push(site);
                clamped += c;
            }
            Err(Error::DegenerateGeometry(msg)) => {
                log::warn!("event=skip_fingerprint site=({},{}) reason=\"{msg}\"", site.x1, site.x2);
                skipped_sites += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if inputs.is_empty() {
        return Err(Error::DegenerateGeometry("every fingerprint site is degenerate".into()));
    }
    Ok(Collected { train: TrainingSet::new(inputs, positions)?, skipped_sites, clamped })
}

/// Estimators evaluated in a trial.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialModels<'a> {
    pub gpr: Option<&'a GprModel>,
    pub knn: Option<(&'a TrainingSet, KnnConfig)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialErrors {
    pub gpr_sq_errors: Vec<f64>,
    /// `sqrt(var_x1 + var_x2)` per terminal.
    pub gpr_posterior_std: Vec<f64>,
    pub knn_sq_errors: Vec<f64>,
    /// Terminals whose measurement hit degenerate geometry.
    pub skipped_terminals: usize,
    pub clamped: usize,
}

/// Measures every terminal once and locates it with each configured estimator.
pub fn run_single_trial(
    scenario: &Scenario,
    ch: &ChannelSetup,
    models: &TrialModels,
    rng: &mut ChaCha8Rng,
) -> Result<TrialErrors> {
    let mut out = TrialErrors::default();
    for &mt in &scenario.terminals {
        let rss = match ch.measure(mt, scenario, rng) {
            Ok((rss, c)) => {
                out.clamped += c;
                rss
            }
            Err(Error::DegenerateGeometry(msg)) => {
                log::warn!("event=skip_terminal terminal=({},{}) reason=\"{msg}\"", mt.x1, mt.x2);
                out.skipped_terminals += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(model) = models.gpr {
            let pred = model.predict(&rss)?;
            out.gpr_sq_errors.push(squared_error(pred.mean, mt));
            out.gpr_posterior_std.push(pred.radial_std());
        }
        if let Some((train, cfg)) = models.knn {
            out.knn_sq_errors.push(squared_error(knn_locate(train, &rss, &cfg)?, mt));
        }
    }
    if out.skipped_terminals == scenario.terminals.len() {
        return Err(Error::DegenerateGeometry("every terminal is degenerate".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub layout: String,
    pub antennas: usize,
    pub fingerprints: usize,
    pub estimator: String,
    pub runs: usize,
    pub rmse: f64,
    pub rmse_stderr: f64,
    pub mean_posterior_std: Option<f64>,
    pub wall_time: f64,
}

pub const RESULTS_HEADER: &str = "layout,M,L,estimator,runs,rmse_m,rmse_stderr_m,mean_post_std_m,wall_s";

/// Results CSV. `wall_s` is left empty unless `record_wall_time` is set.
pub fn results_csv(rows: &[ResultRow], record_wall_time: bool) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let post = r.mean_posterior_std.map(|v| v.to_string()).unwrap_or_default();
        let wall = if record_wall_time { format!("{:.3}", r.wall_time) } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.layout, r.antennas, r.fingerprints, r.estimator, r.runs, r.rmse, r.rmse_stderr, post, wall
        ));
    }
    out
}

/// Per-cell bookkeeping that goes into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub layout: String,
    pub antennas: usize,
    pub fingerprints: usize,
    pub failed_runs: usize,
    pub skipped_terminals: usize,
    pub skipped_fingerprint_sites: usize,
    pub clamp_events: usize,
    pub pilot_hyperparameters: Option<[Hyperparameters; 2]>,
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellReport>,
    pub workers: usize,
}

struct Cell {
    layout: LayoutVariant,
    antennas: usize,
    fingerprints: usize,
    scenario: Scenario,
}

impl Cell {
    fn tags(&self, stream: u64) -> [u64; 4] {
        [stream, self.layout.id(), self.antennas as u64, self.fingerprints as u64]
    }
}

#[derive(Debug, Default)]
struct RunRecord {
    gpr_mse: Option<f64>,
    gpr_post_std: Option<f64>,
    knn_mse: Option<f64>,
    gpr_secs: f64,
    knn_secs: f64,
    skipped_terminals: usize,
    skipped_sites: usize,
    clamped: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// RMSE over runs from per-run mean squared errors, with a delta-method
/// standard error: `se(rmse) = se(mean mse) / (2 rmse)`.
pub fn aggregate_rmse(per_run_mse: &[f64]) -> (f64, f64) {
    let n = per_run_mse.len();
    let m = mean(per_run_mse);
    let rmse = m.sqrt();
    if n < 2 || rmse == 0.0 {
        return (rmse, 0.0);
    }
    let var = per_run_mse.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (n - 1) as f64;
    (rmse, (var / n as f64).sqrt() / (2.0 * rmse))
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

fn build_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &layout in &cfg.deployment.layouts {
        for &antennas in &cfg.antenna_counts {
            for &fingerprints in &cfg.fingerprint_counts {
                let spec = cfg.deployment.spec(layout, antennas, fingerprints);
                let scenario = build_scenario(&spec, cfg.master_seed)?;
                cells.push(Cell { layout, antennas, fingerprints, scenario });
            }
        }
    }
    Ok(cells)
}

fn pilot_fit(cfg: &ExperimentConfig, cell: &Cell) -> Result<[Hyperparameters; 2]> {
    let ch = ChannelSetup::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.master_seed, &cell.tags(seeds::PILOT_DATA)));
    let collected = collect_fingerprints(&cell.scenario, &ch, &mut rng)?;
    let fit_cfg = FitConfig { seed: seeds::derive(cfg.master_seed, &cell.tags(seeds::PILOT_FIT)), ..cfg.fit.clone() };
    let model = fit(&collected.train, &fit_cfg)?;
    log::info!(
        "event=pilot_fit layout={} M={} L={} evals={} x1={:?} x2={:?}",
        cell.layout.label(),
        cell.antennas,
        cell.fingerprints,
        model.diagnostics.objective_evals,
        model.coordinate(crate::gpr::Coordinate::X1).hyper,
        model.coordinate(crate::gpr::Coordinate::X2).hyper,
    );
    Ok(model.hyperparameters())
}

fn run_once(cfg: &ExperimentConfig, cell: &Cell, pilot: Option<[Hyperparameters; 2]>, run: usize) -> Result<RunRecord> {
    let ch = ChannelSetup::from_config(cfg);
    let mut tags = cell.tags(seeds::RUN).to_vec();
    tags.push(run as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.master_seed, &tags));
    let collected = collect_fingerprints(&cell.scenario, &ch, &mut rng)?;
    let mut rec =
        RunRecord { skipped_sites: collected.skipped_sites, clamped: collected.clamped, ..Default::default() };

    let mut gpr_model = None;
    if cfg.estimator.gpr() {
        let t = Instant::now();
        let mut fit_cfg = cfg.fit.clone();
        match pilot {
            Some(h) => fit_cfg.hyperparameters = Some(h),
            None => {
                tags[0] = seeds::RUN_FIT;
                fit_cfg.seed = seeds::derive(cfg.master_seed, &tags);
            }
        }
        gpr_model = Some(fit(&collected.train, &fit_cfg)?);
        rec.gpr_secs += t.elapsed().as_secs_f64();
    }
    let models =
        TrialModels { gpr: gpr_model.as_ref(), knn: cfg.estimator.knn().then_some((&collected.train, cfg.knn)) };
    // terminal measurements depend on (layout, M, run) only, so cells that
    // differ in L see the same test noise
    let mut terminal_rng = ChaCha8Rng::seed_from_u64(seeds::derive(
        cfg.master_seed,
        &[seeds::TERMINALS, cell.layout.id(), cell.antennas as u64, run as u64],
    ));
    let t = Instant::now();
    let trial = run_single_trial(&cell.scenario, &ch, &models, &mut terminal_rng)?;
    let elapsed = t.elapsed().as_secs_f64();
    // online cost is shared; split it evenly between estimators
    let share = if cfg.estimator.gpr() && cfg.estimator.knn() { elapsed / 2.0 } else { elapsed };
    if cfg.estimator.gpr() {
        rec.gpr_mse = Some(mean(&trial.gpr_sq_errors));
        rec.gpr_post_std = Some(mean(&trial.gpr_posterior_std));
        rec.gpr_secs += share;
    }
    if cfg.estimator.knn() {
        rec.knn_mse = Some(mean(&trial.knn_sq_errors));
        rec.knn_secs += share;
    }
    rec.skipped_terminals = trial.skipped_terminals;
    rec.clamped += trial.clamped;
    Ok(rec)
}

/// Runs the full grid with `workers` threads (0 = one per core).
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = build_cells(cfg)?;
    let pool = build_pool(workers)?;
    let workers = pool.current_num_threads();
    log::info!(
        "event=experiment_start cells={} runs={} workers={} seed={}",
        cells.len(),
        cfg.num_mc_runs,
        workers,
        cfg.master_seed
    );

    pool.install(|| {
        let needs_pilot = cfg.estimator.gpr()
            && cfg.hyperparameters == HyperparameterPolicy::PerCell
            && cfg.fit.hyperparameters.is_none();
        let pilots: Vec<(Option<[Hyperparameters; 2]>, f64)> = cells
            .par_iter()
            .map(|cell| -> Result<_> {
                if !needs_pilot {
                    return Ok((None, 0.0));
                }
                let t = Instant::now();
                let h = pilot_fit(cfg, cell).map_err(|e| {
                    Error::ExperimentAborted(format!(
                        "pilot fit failed for layout={} M={} L={}: {e}",
                        cell.layout.label(),
                        cell.antennas,
                        cell.fingerprints
                    ))
                })?;
                Ok((Some(h), t.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()?;

        let tasks: Vec<(usize, usize)> =
            (0..cells.len()).flat_map(|c| (0..cfg.num_mc_runs).map(move |r| (c, r))).collect();
        let outcomes: Vec<Result<RunRecord>> =
            tasks.par_iter().map(|&(c, r)| run_once(cfg, &cells[c], pilots[c].0, r)).collect();

        let mut rows = Vec::new();
        let mut reports = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let runs = &outcomes[c * cfg.num_mc_runs..(c + 1) * cfg.num_mc_runs];
            let ok: Vec<&RunRecord> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            let failed = runs.len() - ok.len();
            if failed * 2 >= runs.len() {
                let first = runs.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
                return Err(Error::ExperimentAborted(format!(
                    "cell layout={} M={} L={} failed {failed}/{} runs; first error: {first}",
                    cell.layout.label(),
                    cell.antennas,
                    cell.fingerprints,
                    runs.len()
                )));
            }
            if failed > 0 {
                log::warn!(
                    "event=runs_failed layout={} M={} L={} failed={failed}",
                    cell.layout.label(),
                    cell.antennas,
                    cell.fingerprints
                );
            }
            let row = |estimator: &str, mse: Vec<f64>, post: Option<f64>, secs: f64| {
                let (rmse, se) = aggregate_rmse(&mse);
                ResultRow {
                    layout: cell.layout.label().into(),
                    antennas: cell.antennas,
                    fingerprints: cell.fingerprints,
                    estimator: estimator.into(),
                    runs: mse.len(),
                    rmse,
                    rmse_stderr: se,
                    mean_posterior_std: post,
                    wall_time: secs,
                }
            };
            let mut wall = pilots[c].1;
            if cfg.estimator.gpr() {
                let mse: Vec<f64> = ok.iter().filter_map(|r| r.gpr_mse).collect();
                let post: Vec<f64> = ok.iter().filter_map(|r| r.gpr_post_std).collect();
                let secs = pilots[c].1 + ok.iter().map(|r| r.gpr_secs).sum::<f64>();
                rows.push(row("gpr", mse, Some(mean(&post)), secs));
            }
            if cfg.estimator.knn() {
                let mse: Vec<f64> = ok.iter().filter_map(|r| r.knn_mse).collect();
                let secs = ok.iter().map(|r| r.knn_secs).sum::<f64>();
                rows.push(row("knn", mse, None, secs));
            }
            wall += ok.iter().map(|r| r.gpr_secs + r.knn_secs).sum::<f64>();
            let report = CellReport {
                layout: cell.layout.label().into(),
                antennas: cell.antennas,
                fingerprints: cell.fingerprints,
                failed_runs: failed,
                skipped_terminals: ok.iter().map(|r| r.skipped_terminals).sum(),
                skipped_fingerprint_sites: ok.iter().map(|r| r.skipped_sites).sum(),
                clamp_events: ok.iter().map(|r| r.clamped).sum(),
                pilot_hyperparameters: pilots[c].0,
                wall_s: wall,
            };
            if report.clamp_events > 0 {
                log::info!(
                    "event=clamp layout={} M={} L={} count={}",
                    report.layout,
                    report.antennas,
                    report.fingerprints,
                    report.clamp_events
                );
            }
            reports.push(report);
        }
        for r in &rows {
            log::info!(
                "event=cell_done layout={} M={} L={} estimator={} runs={} rmse={:.4} se={:.4}",
                r.layout,
                r.antennas,
                r.fingerprints,
                r.estimator,
                r.runs,
                r.rmse,
                r.rmse_stderr
            );
        }
        Ok(ExperimentOutput { rows, cells: reports, workers })
    })
}

/// `results.csv` -> `results.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    workers: usize,
    seed_derivation: &'static str,
    results_csv: String,
    config: &'a ExperimentConfig,
    cells: &'a [CellReport],
}

impl ExperimentOutput {
    /// Writes the results CSV and its manifest next to it.
    pub fn write(&self, cfg: &ExperimentConfig, csv_path: &Path) -> Result<PathBuf> {
        std::fs::write(csv_path, results_csv(&self.rows, cfg.record_wall_time)).map_err(|e| Error::io(csv_path, e))?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            master_seed: cfg.master_seed,
            workers: self.workers,
            seed_derivation: "splitmix64 absorb(master; stream, layout, M, L[, run])",
            results_csv: csv_path.display().to_string(),
            config: cfg,
            cells: &self.cells,
        };
        let path = manifest_path(csv_path);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub layout: String,
    pub antennas: usize,
    pub fingerprints: usize,
    pub kappa: usize,
    pub runs: usize,
    pub rmse: f64,
    pub rmse_stderr: f64,
    pub best: bool,
}

pub const SWEEP_HEADER: &str = "layout,M,L,kappa,runs,rmse_m,rmse_stderr_m,best";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.layout, r.antennas, r.fingerprints, r.kappa, r.runs, r.rmse, r.rmse_stderr, r.best
        ));
    }
    out
}

/// Validation sites: every fifth fingerprint site (at least one).
fn validation_split(sites: usize) -> Vec<bool> {
    let mut held: Vec<bool> = (0..sites).map(|i| i % 5 == 4).collect();
    if !held.iter().any(|h| *h) {
        if let Some(last) = held.last_mut() {
            *last = true;
        }
    }
    held
}

/// kNN validation sweep over `kappas` for every cell of `cfg`.
///
/// Each run measures all fingerprint sites, holds out every fifth site,
/// re-measures the held-out sites independently as queries, and locates them
/// against the remaining fingerprints.
pub fn sweep_knn(cfg: &ExperimentConfig, kappas: &[usize], workers: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if kappas.is_empty() || kappas.contains(&0) {
        return Err(Error::Config("kappa list must be non-empty and >= 1".into()));
    }
    let cells = build_cells(cfg)?;
    let pool = build_pool(workers)?;
    pool.install(|| {
        let tasks: Vec<(usize, usize)> =
            (0..cells.len()).flat_map(|c| (0..cfg.num_mc_runs).map(move |r| (c, r))).collect();
        let outcomes: Vec<Result<Vec<Option<f64>>>> = tasks
            .par_iter()
            .map(|&(c, r)| {
                let cell = &cells[c];
                let ch = ChannelSetup::from_config(cfg);
                let mut tags = cell.tags(seeds::SWEEP).to_vec();
                tags.push(r as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.master_seed, &tags));
                let held = validation_split(cell.scenario.fingerprint_sites.len());
                let (val_sites, train_sites): (Vec<_>, Vec<_>) =
                    cell.scenario.fingerprint_sites.iter().zip(&held).partition(|(_, h)| **h);
                let train_sites: Vec<Position> = train_sites.into_iter().map(|(p, _)| *p).collect();
                let val_sites: Vec<Position> = val_sites.into_iter().map(|(p, _)| *p).collect();
                if train_sites.is_empty() {
                    return Err(Error::Config("sweep needs at least 2 fingerprint sites".into()));
                }
                let train = collect_at(&train_sites, &cell.scenario, &ch, &mut rng)?.train;
                let queries = collect_at(&val_sites, &cell.scenario, &ch, &mut rng)?.train;
                kappas
                    .iter()
                    .map(|&kappa| {
                        if kappa > train.len() {
                            return Ok(None);
                        }
                        let knn = KnnConfig { kappa, ..cfg.knn };
                        let mut total = 0.0;
                        for (q, truth) in queries.inputs().iter().zip(queries.positions()) {
                            total += squared_error(knn_locate(&train, q, &knn)?, *truth);
                        }
                        Ok(Some(total / queries.len() as f64))
                    })
                    .collect()
            })
            .collect();

        let mut rows = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let runs = &outcomes[c * cfg.num_mc_runs..(c + 1) * cfg.num_mc_runs];
            let ok: Vec<&Vec<Option<f64>>> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            if ok.len() * 2 <= runs.len() {
                let first = runs.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
                return Err(Error::ExperimentAborted(format!("sweep cell failed: {first}")));
            }
            let start = rows.len();
            for (ki, &kappa) in kappas.iter().enumerate() {
                let mse: Vec<f64> = ok.iter().filter_map(|r| r[ki]).collect();
                if mse.is_empty() {
                    continue;
                }
                let (rmse, se) = aggregate_rmse(&mse);
                rows.push(SweepRow {
                    layout: cell.layout.label().into(),
                    antennas: cell.antennas,
                    fingerprints: cell.fingerprints,
                    kappa,
                    runs: mse.len(),
                    rmse,
                    rmse_stderr: se,
                    best: false,
                });
            }
            if let Some(best) = (start..rows.len()).min_by(|&a, &b| rows[a].rmse.total_cmp(&rows[b].rmse)) {
                rows[best].best = true;
                log::info!(
                    "event=sweep_best layout={} M={} L={} kappa={} rmse={:.4}",
                    rows[best].layout,
                    rows[best].antennas,
                    rows[best].fingerprints,
                    rows[best].kappa,
                    rows[best].rmse
                );
            }
        }
        Ok(rows)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{DeploymentConfig, EstimatorChoice};

    #[test]
    fn rmse_examples() {
        let a = [Position::new(1.0, 2.0), Position::new(-3.0, 4.0)];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&[Position::new(3.0, 4.0)], &[Position::new(0.0, 0.0)]).unwrap(), 5.0);
        let est = [Position::new(3.0, 4.0), Position::new(0.0, 7.0)];
        let truth = [Position::new(0.0, 0.0), Position::new(0.0, 0.0)];
        assert!((rmse(&est, &truth).unwrap() - 37f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&est, &truth).unwrap() - 6.0828).abs() < 1e-4);
        assert!(rmse(&est, &truth[..1]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn aggregate_edge_cases() {
        assert_eq!(aggregate_rmse(&[4.0]), (2.0, 0.0));
        assert_eq!(aggregate_rmse(&[0.0, 0.0]), (0.0, 0.0));
        let (r, se) = aggregate_rmse(&[1.0, 3.0]);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        // sd = sqrt(2), se(mean) = 1, delta method: 1 / (2 sqrt 2)
        assert!((se - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn validation_split_holds_out_a_fifth() {
        assert_eq!(validation_split(10).iter().filter(|h| **h).count(), 2);
        assert_eq!(validation_split(3), vec![false, false, true]);
    }

    #[test]
    fn manifest_sits_next_to_csv() {
        assert_eq!(manifest_path(Path::new("/tmp/out/res.csv")), PathBuf::from("/tmp/out/res.manifest.json"));
    }

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            num_mc_runs: 4,
            antenna_counts: vec![9],
            fingerprint_counts: vec![16],
            estimator: EstimatorChoice::Both,
            deployment: DeploymentConfig { terminal_count: 4, ..Default::default() },
            fit: FitConfig { restarts: 1, max_evals: 60, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn tiny_experiment_shapes() {
        let out = run_experiment(&tiny(), 1).unwrap();
        assert_eq!(out.rows.len(), 4); // 2 layouts x 2 estimators
        assert_eq!(out.cells.len(), 2);
        for r in &out.rows {
            assert_eq!(r.runs, 4);
            assert!(r.rmse > 0.0 && r.rmse_stderr >= 0.0);
            assert_eq!(r.mean_posterior_std.is_some(), r.estimator == "gpr");
        }
        let csv = results_csv(&out.rows, false);
        assert!(csv.starts_with(RESULTS_HEADER));
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
    }

    #[test]
    fn physical_mode_runs() {
        let cfg = ExperimentConfig {
            channel_mode: ChannelMode::Physical,
            phy: PhysicalLayerSpec { subcarriers: 20, symbols: 2, ..Default::default() },
            estimator: EstimatorChoice::Knn,
            deployment: DeploymentConfig {
                layouts: vec![LayoutVariant::Spread],
                terminal_count: 4,
                ..Default::default()
            },
            ..tiny()
        };
        let out = run_experiment(&cfg, 1).unwrap();
        assert_eq!(out.rows.len(), 1);
    }

    #[test]
    fn per_run_policy_runs() {
        let cfg = ExperimentConfig {
            hyperparameters: HyperparameterPolicy::PerRun,
            estimator: EstimatorChoice::Gpr,
            num_mc_runs: 2,
            ..tiny()
        };
        let out = run_experiment(&cfg, 1).unwrap();
        assert!(out.cells.iter().all(|c| c.pilot_hyperparameters.is_none()));
    }

    #[test]
    fn sweep_marks_one_best_per_cell() {
        let cfg = ExperimentConfig {
            deployment: DeploymentConfig {
                layouts: vec![LayoutVariant::Spread],
                terminal_count: 4,
                ..Default::default()
            },
            fingerprint_counts: vec![25],
            ..tiny()
        };
        let rows = sweep_knn(&cfg, &(1..=10).collect::<Vec<_>>(), 1).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows.iter().filter(|r| r.best).count(), 1);
        assert!(sweep_knn(&cfg, &[], 1).is_err());
    }
}
