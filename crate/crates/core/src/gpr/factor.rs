use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// First jitter level, as a fraction of the mean diagonal.
pub const JITTER_START: f64 = 1e-8;
/// Largest jitter level tried before giving up.
pub const JITTER_MAX: f64 = 1e-2;

/// Cholesky factor of an SPD matrix, possibly after adding diagonal jitter.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    /// Absolute amount that was added to the diagonal (0 when none was needed).
    pub jitter: f64,
}

impl SpdFactor {
    /// Factorizes `a`, escalating diagonal jitter from `1e-8` to `1e-2` times
    /// the mean diagonal in decades when the plain factorization fails.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidArgument(format!("cannot factorize a {:?} matrix", a.shape())));
        }
        if let Some(chol) = try_cholesky(a.clone()) {
            return Ok(SpdFactor { chol, jitter: 0.0 });
        }
        let mean_diag = a.diagonal().mean();
        if !(mean_diag.is_finite() && mean_diag > 0.0) {
            return Err(Error::IllConditionedKernel { max_jitter: 0.0 });
        }
        let mut level = JITTER_START;
        while level <= JITTER_MAX * (1.0 + 1e-9) {
            let jitter = level * mean_diag;
            let mut b = a.clone();
            for i in 0..n {
                b[(i, i)] += jitter;
            }
            if let Some(chol) = try_cholesky(b) {
                return Ok(SpdFactor { chol, jitter });
            }
            level *= 10.0;
        }
        Err(Error::IllConditionedKernel { max_jitter: JITTER_MAX * mean_diag })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `L L^T = A + jitter I`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.l_dirty().solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

fn try_cholesky(a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0);
    ok.then_some(chol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_needs_no_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = SpdFactor::new(a.clone()).unwrap();
        assert_eq!(f.jitter, 0.0);
        let l = f.lower();
        assert!((&l * l.transpose() - a).norm() < 1e-12);
        assert!((f.log_det() - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gets_jitter() {
        // rank one: v v^T
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = SpdFactor::new(a.clone()).unwrap();
        let mean_diag = 14.0 / 3.0;
        assert!(f.jitter >= 1e-8 * mean_diag * 0.999 && f.jitter <= 1e-2 * mean_diag * 1.001);
        let l = f.lower();
        let mut b = a;
        for i in 0..3 {
            b[(i, i)] += f.jitter;
        }
        assert!((&l * l.transpose() - &b).norm() / b.norm() < 1e-8);
    }

    #[test]
    fn indefinite_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(SpdFactor::new(a), Err(Error::IllConditionedKernel { .. })));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 5.0, 1.0]);
        assert!(matches!(SpdFactor::new(a), Err(Error::IllConditionedKernel { .. })));
    }

    #[test]
    fn solves_agree() {
        let a = DMatrix::from_row_slice(3, 3, &[6.0, 1.0, 0.5, 1.0, 5.0, 1.0, 0.5, 1.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.25]);
        let f = SpdFactor::new(a.clone()).unwrap();
        let x = f.solve(&b);
        assert!((&a * &x - &b).norm() < 1e-12);
        let y = f.solve_lower(&b);
        assert!((f.lower() * y - b).norm() < 1e-12);
    }
}
