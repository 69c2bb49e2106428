use nalgebra::{DMatrix, SymmetricEigen};

use super::LatticeOperator;
use crate::error::{Error, Result};

/// Largest grid for which a dense eigensolve is attempted.
pub const DEFAULT_EIGEN_CAP: usize = 4096;

/// Eigenpairs of `-𝕃_N`, eigenvalues ascending, eigenvectors orthonormal
/// with respect to the plain Euclidean inner product (columns of `vectors`).
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub(super) fn compute(op: &LatticeOperator, cap: usize) -> Result<Self> {
        let n = op.n();
        if n > cap {
            return Err(Error::EigenCapExceeded { n, cap });
        }
        let eig = SymmetricEigen::new(-op.dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            // Fix the sign so that the first nonnegligible entry is positive.
            if let Some(first) = col.iter().find(|v| v.abs() > 1e-8) {
                if *first < 0.0 {
                    col.neg_mut();
                }
            }
            vectors.set_column(dst, &col);
        }
        Ok(SpectralDecomp { values, vectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// Smallest nonzero eigenvalue `λ_1`.
    pub fn spectral_gap(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(0.0)
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.values.len();
        let gram = self.vectors.transpose() * &self.vectors;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max |𝕃_N + V Λ Vᵀ|`, elementwise.
    pub fn reconstruction_error(&self, op: &LatticeOperator) -> f64 {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[k];
        }
        let rebuilt = scaled * self.vectors.transpose();
        (rebuilt + op.dense()).amax()
    }

    /// `exp(t 𝕃_N) = V e^{-tΛ} Vᵀ`.
    pub fn semigroup(&self, t: f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= (-t * self.values[k]).exp();
        }
        scaled * self.vectors.transpose()
    }
}
