//! Independent reference implementations used by the integration tests.
//! Nothing here calls the library's kernel, factorization or solver code.

#![allow(dead_code)]

use mimo_fp::channel::RssVector;
use mimo_fp::gpr::{Hyperparameters, KernelParams, TrainingSet};
use mimo_fp::scenario::Position;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn rv(v: &[f64]) -> RssVector {
    RssVector::new(v.to_vec()).unwrap()
}

pub fn random_training_set<R: Rng>(rng: &mut R, l: usize, m: usize) -> TrainingSet {
    let inputs = (0..l).map(|_| rv(&(0..m).map(|_| rng.random_range(-40.0..0.0)).collect::<Vec<_>>())).collect();
    let positions = (0..l).map(|_| Position::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
    TrainingSet::new(inputs, positions).unwrap()
}

/// Hyperparameters whose kernel length-scale is comparable to the spread of
/// inputs drawn by [`random_training_set`].
pub fn random_hyper<R: Rng>(rng: &mut R, m: usize) -> Hyperparameters {
    let spread = 2.0 * m as f64 * 133.0; // E||a-b||^2 for U(-40,0) entries
    Hyperparameters {
        kernel: KernelParams::new(
            10f64.powf(rng.random_range(1.0..3.0)),
            10f64.powf(rng.random_range(-1.5..0.5)) / spread,
            10f64.powf(rng.random_range(-6.0..-3.0)),
        ),
        noise_std: 10f64.powf(rng.random_range(-0.5..1.0)),
    }
}

/// Plain two-loop evaluation of `theta0 exp(-theta1 |a-b|^2) + theta2 a.b`.
pub fn kernel(a: &[f64], b: &[f64], k: &KernelParams) -> f64 {
    let mut sq = 0.0;
    let mut dot = 0.0;
    for i in 0..a.len() {
        sq += (a[i] - b[i]).powi(2);
        dot += a[i] * b[i];
    }
    k.theta0 * (-k.theta1 * sq).exp() + k.theta2 * dot
}

pub fn gram(train: &TrainingSet, k: &KernelParams, diag: f64) -> DMatrix<f64> {
    let x = train.inputs();
    let l = x.len();
    DMatrix::from_fn(l, l, |i, j| kernel(x[i].values(), x[j].values(), k) + if i == j { diag } else { 0.0 })
}

/// Posterior mean and variance with an explicit LU inverse of `C + s^2 I`.
pub fn dense_posterior(
    train: &TrainingSet,
    targets: &[f64],
    h: &Hyperparameters,
    jitter: f64,
    q: &[f64],
) -> (f64, f64) {
    let s2 = h.noise_std * h.noise_std;
    let inv = gram(train, &h.kernel, s2 + jitter).try_inverse().expect("invertible");
    let mu = targets.iter().sum::<f64>() / targets.len() as f64;
    let z = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - mu));
    let c = DVector::from_iterator(train.len(), train.inputs().iter().map(|p| kernel(p.values(), q, &h.kernel)));
    let mean = mu + (c.transpose() * &inv * z)[(0, 0)];
    let var = s2 + kernel(q, q, &h.kernel) - (c.transpose() * &inv * &c)[(0, 0)];
    (mean, var)
}

/// Log evidence via LU inverse and LU determinant.
pub fn dense_lml(train: &TrainingSet, targets: &[f64], h: &Hyperparameters) -> f64 {
    let a = gram(train, &h.kernel, h.noise_std * h.noise_std);
    let mu = targets.iter().sum::<f64>() / targets.len() as f64;
    let z = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - mu));
    let quad = (z.transpose() * a.clone().try_inverse().unwrap() * &z)[(0, 0)];
    let n = targets.len() as f64;
    -0.5 * quad - 0.5 * a.determinant().ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

/// Continuity-anchored three-slope gain: flat to 10 m, then 20 dB/decade to
/// 50 m, then 40 dB/decade.
pub fn three_slope_gain_db(d: f64) -> f64 {
    if d <= 10.0 {
        0.0
    } else if d <= 50.0 {
        -20.0 * (d / 10.0).log10()
    } else {
        -20.0 * 5f64.log10() - 40.0 * (d / 50.0).log10()
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
