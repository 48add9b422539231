//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits nonzero if any failed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use mimo_fp::baselines::{knn_locate, KnnConfig};
use mimo_fp::channel::{mean_path_gain_db, simulate_hardened_rss, PathLossModel, PhysicalLayerSpec};
use mimo_fp::gpr::{fit, kernel_matrix, Coordinate, FitConfig, SpdFactor};
use mimo_fp::harness::{
    results_csv, run_experiment, DeploymentConfig, EstimatorChoice, ExperimentConfig, LayoutVariant, ResultRow,
};
use mimo_fp::scenario::{build_scenario, AntennaLayout, DeploymentSpec, Position};
use mimo_fp::TrainingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_mean, mut worst_var) = (0f64, 0f64);
    for _ in 0..100 {
        let (l, m) = (rng.random_range(1..=50), rng.random_range(1..=16));
        let train = random_training_set(&mut rng, l, m);
        let hyper = [random_hyper(&mut rng, m), random_hyper(&mut rng, m)];
        let model = fit(&train, &FitConfig { hyperparameters: Some(hyper), ..Default::default() }).unwrap();
        let q: Vec<f64> = (0..m).map(|_| rng.random_range(-40.0..0.0)).collect();
        let p = model.predict(&rv(&q)).unwrap();
        for (c, mean, var) in [(Coordinate::X1, p.mean.x1, p.var_x1), (Coordinate::X2, p.mean.x2, p.var_x2)] {
            let cm = model.coordinate(c);
            let (m_ref, v_ref) = dense_posterior(&train, &train.targets(c), &cm.hyper, cm.factor.jitter, &q);
            worst_mean = worst_mean.max(rel(mean, m_ref));
            worst_var = worst_var.max(rel(var, v_ref));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst_mean <= 1e-8 && worst_var <= 1e-6 && secs < 10.0,
        format!("max rel err mean {worst_mean:.2e}, var {worst_var:.2e}, {secs:.2} s"),
    )
}

fn kernel_validity() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut asymmetric, mut unfactorable, mut jittered) = (0, 0, 0);
    for _ in 0..100 {
        let (l, m) = (rng.random_range(1..=200), rng.random_range(1..=64));
        let train = random_training_set(&mut rng, l, m);
        // wide ranges: long length-scales and strong linear terms approach rank deficiency
        let k = mimo_fp::KernelParams::new(
            10f64.powf(rng.random_range(-2.0..3.0)),
            10f64.powf(rng.random_range(-8.0..0.0)),
            10f64.powf(rng.random_range(-8.0..0.0)),
        );
        let k = kernel_matrix(train.inputs(), &k).unwrap();
        if k != k.transpose() {
            asymmetric += 1;
        }
        match SpdFactor::new(k) {
            Ok(f) if f.jitter > 0.0 => jittered += 1,
            Ok(_) => {}
            Err(_) => unfactorable += 1,
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        asymmetric == 0 && unfactorable == 0 && secs < 10.0,
        format!("asymmetric {asymmetric}/100, unfactorable {unfactorable}/100 ({jittered} needed jitter), {secs:.2} s"),
    )
}

fn channel_hardening() -> Outcome {
    let t = Instant::now();
    // compact antennas around a central terminal keep every link at high SNR
    let spec = DeploymentSpec { antenna_layout: AntennaLayout::CompactGrid, antenna_count: 16, ..Default::default() };
    let scenario = build_scenario(&spec, 0).unwrap();
    let model = PathLossModel::three_slope_urban().with_shadowing(0.0);
    let mt = Position::new(50.0, 50.0);
    let trials = 500;
    let std_at = |subcarriers: usize| -> f64 {
        let phy = PhysicalLayerSpec { subcarriers, symbols: 10, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let draws: Vec<Vec<f64>> = (0..trials)
            .map(|_| simulate_hardened_rss(mt, &scenario, &model, &phy, &mut rng).unwrap().rss.into_inner())
            .collect();
        let m = scenario.antennas.len();
        let per_antenna: Vec<f64> = (0..m)
            .map(|j| {
                let xs: Vec<f64> = draws.iter().map(|d| d[j]).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
            })
            .collect();
        per_antenna.iter().sum::<f64>() / m as f64
    };
    let (s10, s100) = (std_at(10), std_at(100));
    let ratio = s100 / s10;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        ratio <= 0.45 && secs < 30.0,
        format!("std {s10:.4} dB at 10 subcarriers, {s100:.4} dB at 100, ratio {ratio:.3}, {secs:.2} s"),
    )
}

fn path_loss_exactness() -> Outcome {
    let model = PathLossModel::three_slope_urban();
    let expected = [(5.0, 0.0), (10.0, 0.0), (50.0, -13.9794), (100.0, -26.0206)];
    let mut worst = 0f64;
    let mut worst_oracle = 0f64;
    for (d, want) in expected {
        let got = mean_path_gain_db(d, &model).unwrap();
        worst = worst.max((got - three_slope_gain_db(d)).abs());
        // the stated values are rounded to 4 decimals
        worst_oracle = worst_oracle.max((got - want).abs());
    }
    outcome(
        worst <= 1e-6 && worst_oracle <= 5e-5,
        format!("max |err| vs recomputed formula {worst:.1e} dB, vs 4-decimal table {worst_oracle:.1e} dB"),
    )
}

fn trend_config() -> ExperimentConfig {
    ExperimentConfig {
        num_mc_runs: 50,
        antenna_counts: vec![36, 100],
        fingerprint_counts: vec![25, 100, 225, 400, 625],
        estimator: EstimatorChoice::Gpr,
        deployment: DeploymentConfig { layouts: vec![LayoutVariant::Spread], terminal_count: 25, ..Default::default() },
        ..Default::default()
    }
}

fn combined_se(a: &ResultRow, b: &ResultRow) -> f64 {
    (a.rmse_stderr.powi(2) + b.rmse_stderr.powi(2)).sqrt()
}

fn trend_reproduction(first_csv: &mut Option<String>) -> Outcome {
    let t = Instant::now();
    let cfg = trend_config();
    assert_eq!(cfg.path_loss.shadowing_std_db, 5.0);
    let rows = match run_experiment(&cfg, 1) {
        Ok(out) => out.rows,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    *first_csv = Some(results_csv(&rows, false));
    let secs = t.elapsed().as_secs_f64();
    let by_m = |m: usize| -> Vec<&ResultRow> { rows.iter().filter(|r| r.antennas == m).collect() };
    let (m36, m100) = (by_m(36), by_m(100));
    let mut notes = Vec::new();
    let mut ok = true;
    for series in [&m36, &m100] {
        for w in series.windows(2) {
            if w[1].rmse > w[0].rmse + combined_se(w[0], w[1]) {
                ok = false;
                notes.push(format!(
                    "(a) M={} L={}->{} rises {:.3} m",
                    w[0].antennas,
                    w[0].fingerprints,
                    w[1].fingerprints,
                    w[1].rmse - w[0].rmse
                ));
            }
        }
        let gain = |i: usize, j: usize| (series[i].rmse - series[j].rmse) / series[i].rmse;
        if gain(3, 4) >= gain(0, 1) {
            ok = false;
            notes.push(format!(
                "(c) M={} gain 400->625 {:.3} >= 25->100 {:.3}",
                series[0].antennas,
                gain(3, 4),
                gain(0, 1)
            ));
        }
    }
    for (a, b) in m36.iter().zip(&m100) {
        if b.rmse > a.rmse {
            ok = false;
            notes.push(format!("(b) L={} M=100 {:.3} > M=36 {:.3}", a.fingerprints, b.rmse, a.rmse));
        }
    }
    let fmt = |s: &[&ResultRow]| s.iter().map(|r| format!("{:.2}", r.rmse)).collect::<Vec<_>>().join("/");
    let mut detail = format!("RMSE M=36 {} m, M=100 {} m, {secs:.0} s", fmt(&m36), fmt(&m100));
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    outcome(ok && secs < 300.0, detail)
}

fn layout_contrast() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig {
        num_mc_runs: 50,
        antenna_counts: vec![64],
        fingerprint_counts: vec![400],
        estimator: EstimatorChoice::Gpr,
        deployment: DeploymentConfig {
            layouts: vec![LayoutVariant::Spread, LayoutVariant::Compact],
            ..Default::default()
        },
        ..Default::default()
    };
    let rows = match run_experiment(&cfg, 1) {
        Ok(out) => out.rows,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    let (spread, compact) = (&rows[0], &rows[1]);
    let gap = (compact.rmse - spread.rmse) / combined_se(spread, compact);
    outcome(
        gap >= 2.0 && secs < 120.0,
        format!("spread {:.3} m, compact {:.3} m, gap {gap:.1} combined SE, {secs:.0} s", spread.rmse, compact.rmse),
    )
}

fn knn_sanity() -> Outcome {
    let inputs: Vec<_> = (0..10).map(|i| rv(&[-(i as f64), -2.0 * i as f64, 1.0])).collect();
    let positions: Vec<_> = (0..10).map(|i| Position::new(10.0 * i as f64, 5.0 + i as f64)).collect();
    let train = TrainingSet::new(inputs.clone(), positions.clone()).unwrap();
    let exact = knn_locate(&train, &inputs[7], &KnnConfig::default().with_kappa(1)).unwrap();
    let exact_err = ((exact.x1 - positions[7].x1).powi(2) + (exact.x2 - positions[7].x2).powi(2)).sqrt();

    let pair = TrainingSet::new(
        vec![rv(&[1.0, 0.0]), rv(&[0.0, 2.0])],
        vec![Position::new(0.0, 0.0), Position::new(10.0, 0.0)],
    )
    .unwrap();
    let hand = knn_locate(&pair, &rv(&[0.0, 0.0]), &KnnConfig::default().with_kappa(2)).unwrap();
    outcome(
        exact_err == 0.0 && hand == Position::new(2.0, 0.0),
        format!("exact-match error {exact_err} m, weighted example ({}, {})", hand.x1, hand.x2),
    )
}

fn determinism(first_csv: &Option<String>) -> Outcome {
    let Some(first) = first_csv else {
        return outcome(false, "criterion 5 produced no results to compare");
    };
    let second = match run_experiment(&trend_config(), 2) {
        Ok(out) => results_csv(&out.rows, false),
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    outcome(&second == first, format!("1 vs 2 workers, {} bytes, identical: {}", first.len(), &second == first))
}

fn main() -> ExitCode {
    let mut csv = None;
    let results = [
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 kernel validity", kernel_validity()),
        ("3 channel hardening", channel_hardening()),
        ("4 path-loss exactness", path_loss_exactness()),
        ("5 trend reproduction", trend_reproduction(&mut csv)),
        ("6 layout contrast", layout_contrast()),
        ("7 kNN sanity", knn_sanity()),
        ("8 determinism", determinism(&csv)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
