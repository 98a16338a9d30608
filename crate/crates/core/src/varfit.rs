//! Equation-by-equation least squares for a reduced-form VAR with intercept.

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

pub(crate) struct LeastSquaresVar {
    /// `(1 + K p) × K`; row 0 is the intercept, rows `1 + (ℓ-1)K ..` hold lag ℓ.
    pub params: DMatrix<f64>,
    /// `T* × K` residuals.
    pub residuals: DMatrix<f64>,
}

/// Fits `y_t = c + Σ_{ℓ=1..p} A_ℓ y_{t-ℓ} + u_t` on rows `first..n` of the
/// window. `first` must be at least `p`.
pub(crate) fn fit(window: DMatrixView<'_, f64>, p: usize, first: usize) -> Result<LeastSquaresVar> {
    let (n, k) = window.shape();
    debug_assert!(first >= p);
    let rows = n.saturating_sub(first);
    let cols = 1 + k * p;
    if rows <= cols {
        return Err(Error::InsufficientRows {
            rows,
            required: cols + 1,
        });
    }
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            let (lag, j) = ((c - 1) / k + 1, (c - 1) % k);
            window[(first + r - lag, j)]
        }
    });
    let y = window.rows(first, rows).into_owned();
    let xtx = x.tr_mul(&x);
    let chol = xtx.cholesky().ok_or(Error::Singular)?;
    let params = chol.solve(&x.tr_mul(&y));
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let residuals = y - &x * &params;
    Ok(LeastSquaresVar { params, residuals })
}

impl LeastSquaresVar {
    /// `K × K` matrix mapping `y_{t-lag}` to `y_t`.
    pub fn lag_matrix(&self, lag: usize) -> DMatrix<f64> {
        let k = self.params.ncols();
        self.params.rows(1 + (lag - 1) * k, k).transpose()
    }

    /// Residual cross-product divided by `divisor`.
    pub fn residual_covariance(&self, divisor: f64) -> DMatrix<f64> {
        let s = self.residuals.tr_mul(&self.residuals) / divisor;
        (&s + s.transpose()) * 0.5
    }
}
