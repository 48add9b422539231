//! Squared-exponential plus linear covariance over RSS vectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::RssVector;
use crate::error::{Error, Result};

/// `theta0 * exp(-theta1 * |a - b|^2) + theta2 * a.b`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Weight of the squared-exponential term (dB^2 scaled).
    pub theta0: f64,
    /// Inverse squared length-scale in signal space (1/dB^2).
    pub theta1: f64,
    /// Weight of the linear term.
    pub theta2: f64,
}

impl KernelParams {
    pub fn new(theta0: f64, theta1: f64, theta2: f64) -> Self {
        KernelParams { theta0, theta1, theta2 }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.theta0, self.theta1, self.theta2];
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!("kernel parameters must be finite and >= 0, got {self:?}")));
        }
        if ps.iter().all(|p| *p == 0.0) {
            return Err(Error::InvalidArgument("kernel parameters are all zero".into()));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn combine(&self, sq_dist: f64, dot: f64) -> f64 {
        self.theta0 * (-self.theta1 * sq_dist).exp() + self.theta2 * dot
    }
}

/// Squared distance and inner product in one pass. Every kernel value in the
/// crate goes through here so matrix entries and pointwise evaluations agree
/// bit for bit.
#[inline]
pub(crate) fn sq_dist_and_dot(a: &[f64], b: &[f64]) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let mut sq = 0.0;
    let mut dot = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
        dot += x * y;
    }
    (sq, dot)
}

pub fn kernel_eval(a: &RssVector, b: &RssVector, k: &KernelParams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let (sq, dot) = sq_dist_and_dot(a.values(), b.values());
    Ok(k.combine(sq, dot))
}

/// Hyperparameter-independent pairwise statistics of a fixed input set.
///
/// Building a kernel matrix from these costs O(L^2) instead of O(L^2 M),
/// which is what makes repeated evidence evaluations affordable.
#[derive(Debug, Clone)]
pub(crate) struct PairwiseStats {
    n: usize,
    sq_dist: Vec<f64>,
    dot: Vec<f64>,
}

impl PairwiseStats {
    /// `rows` is row-major, `n` rows of `dim` values each.
    pub(crate) fn new(rows: &[f64], n: usize, dim: usize) -> Self {
        let mut sq_dist = vec![0.0; n * n];
        let mut dot = vec![0.0; n * n];
        for i in 0..n {
            let a = &rows[i * dim..(i + 1) * dim];
            for j in i..n {
                let (sq, d) = sq_dist_and_dot(a, &rows[j * dim..(j + 1) * dim]);
                sq_dist[i * n + j] = sq;
                sq_dist[j * n + i] = sq;
                dot[i * n + j] = d;
                dot[j * n + i] = d;
            }
        }
        PairwiseStats { n, sq_dist, dot }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    /// Kernel matrix plus `diag_add` on the diagonal.
    pub(crate) fn kernel_matrix(&self, k: &KernelParams, diag_add: f64) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let v = k.combine(self.sq_dist[i * n + j], self.dot[i * n + j]);
            if i == j {
                v + diag_add
            } else {
                v
            }
        })
    }

    /// Pairwise distances `|p_i - p_j|` for `i < j`.
    pub(crate) fn upper_distances(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.sq_dist[i * n + j].sqrt()).collect()
    }

    pub(crate) fn mean_sq_norm(&self) -> f64 {
        (0..self.n).map(|i| self.dot[i * self.n + i]).sum::<f64>() / self.n as f64
    }

    /// Statistics restricted to the given row indices.
    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut sq_dist = Vec::with_capacity(m * m);
        let mut dot = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                sq_dist.push(self.sq_dist[i * self.n + j]);
                dot.push(self.dot[i * self.n + j]);
            }
        }
        PairwiseStats { n: m, sq_dist, dot }
    }
}

/// `L x L` matrix of kernel values. Exactly symmetric: the upper triangle is
/// computed and mirrored.
pub fn kernel_matrix(inputs: &[RssVector], k: &KernelParams) -> Result<DMatrix<f64>> {
    let Some(first) = inputs.first() else {
        return Err(Error::InvalidArgument("kernel matrix of an empty input set".into()));
    };
    let dim = first.len();
    let mut rows = Vec::with_capacity(inputs.len() * dim);
    for p in inputs {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.len() });
        }
        rows.extend_from_slice(p.values());
    }
    Ok(PairwiseStats::new(&rows, inputs.len(), dim).kernel_matrix(k, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(v: &[f64]) -> RssVector {
        RssVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let p = rv(&[-3.0, 7.5]);
        assert_eq!(kernel_eval(&p, &p, &KernelParams::new(1.0, 123.0, 0.0)).unwrap(), 1.0);
        let v = kernel_eval(&rv(&[1.0, 2.0]), &rv(&[3.0, 4.0]), &KernelParams::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(v, 11.0);
        let v = kernel_eval(&rv(&[0.0, 0.0]), &rv(&[1.0, 1.0]), &KernelParams::new(2.0, 0.5, 0.0)).unwrap();
        assert!((v - 2.0 * (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.735759).abs() < 1e-6);
    }

    #[test]
    fn eval_rejects_length_mismatch() {
        let e = kernel_eval(&rv(&[1.0]), &rv(&[1.0, 2.0]), &KernelParams::new(1.0, 1.0, 1.0));
        assert!(matches!(e, Err(Error::DimensionMismatch { expected: 1, actual: 2 })));
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(0.0, 0.0, 0.0).validate().is_err());
        assert!(KernelParams::new(-1.0, 1.0, 0.0).validate().is_err());
        assert!(KernelParams::new(f64::NAN, 1.0, 0.0).validate().is_err());
        KernelParams::new(0.0, 0.0, 1.0).validate().unwrap();
    }

    #[test]
    fn single_input_matrix() {
        let p = rv(&[-10.0, -20.0, 5.0]);
        let k = KernelParams::new(3.0, 0.1, 0.5);
        let m = kernel_matrix(std::slice::from_ref(&p), &k).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - (3.0 + 0.5 * 525.0)).abs() < 1e-12);
    }

    #[test]
    fn matrix_rejects_ragged_inputs() {
        let k = KernelParams::new(1.0, 1.0, 1.0);
        assert!(kernel_matrix(&[rv(&[1.0]), rv(&[1.0, 2.0])], &k).is_err());
        assert!(kernel_matrix(&[], &k).is_err());
    }

    proptest! {
        #[test]
        fn eval_is_symmetric(
            a in proptest::collection::vec(-60.0..10.0f64, 8),
            b in proptest::collection::vec(-60.0..10.0f64, 8),
            t0 in 0.0..100.0f64, t1 in 0.0..1.0f64, t2 in 0.0..1.0f64,
        ) {
            let k = KernelParams::new(t0, t1, t2);
            let (a, b) = (rv(&a), rv(&b));
            prop_assert_eq!(kernel_eval(&a, &b, &k).unwrap(), kernel_eval(&b, &a, &k).unwrap());
        }

        #[test]
        fn matrix_matches_pointwise(
            rows in proptest::collection::vec(proptest::collection::vec(-60.0..10.0f64, 5), 1..12),
            t0 in 0.1..100.0f64, t1 in 0.0..1.0f64, t2 in 0.0..1.0f64,
        ) {
            let inputs: Vec<_> = rows.iter().map(|r| rv(r)).collect();
            let k = KernelParams::new(t0, t1, t2);
            let m = kernel_matrix(&inputs, &k).unwrap();
            for i in 0..inputs.len() {
                for j in 0..inputs.len() {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                    prop_assert_eq!(m[(i, j)], kernel_eval(&inputs[i], &inputs[j], &k).unwrap());
                }
            }
        }
    }
}
