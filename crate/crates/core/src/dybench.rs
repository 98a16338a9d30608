//! Diebold-Yilmaz connectedness from the generalized forecast-error
//! variance decomposition of a reduced-form VAR.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::connectedness::{self, ConnectednessTable, DynamicSeries};
use crate::error::{Error, Result};
use crate::panel::ReturnPanel;
use crate::varfit;

/// Default forecast horizon.
pub const DEFAULT_HORIZON: usize = 10;

/// Least-squares VAR(p) estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub p: usize,
    /// `coef[ℓ - 1]` maps `y_{t-ℓ}` to `y_t`.
    pub coef: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    /// Innovation covariance.
    pub sigma: DMatrix<f64>,
    /// Largest eigenvalue modulus of the companion matrix.
    pub spectral_radius: f64,
    pub warnings: Vec<String>,
}

impl VarFit {
    pub fn n_series(&self) -> usize {
        self.sigma.nrows()
    }

    /// A fit with the given coefficients and covariance and zero intercept.
    pub fn from_parts(coef: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        let k = sigma.nrows();
        if sigma.ncols() != k || coef.iter().any(|c| c.shape() != (k, k)) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: coef.first().map_or(sigma.ncols(), |c| c.nrows()),
            });
        }
        let spectral_radius = companion_radius(&coef, k);
        let mut fit = Self {
            p: coef.len(),
            coef,
            intercept: DVector::zeros(k),
            sigma,
            spectral_radius,
            warnings: Vec::new(),
        };
        fit.note_stability();
        Ok(fit)
    }

    fn note_stability(&mut self) {
        if self.spectral_radius >= 1.0 {
            self.warnings.push(format!(
                "nonstationary VAR: companion spectral radius {:.4}",
                self.spectral_radius
            ));
        }
    }
}

fn companion_radius(coef: &[DMatrix<f64>], k: usize) -> f64 {
    let p = coef.len();
    if p == 0 {
        return 0.0;
    }
    let n = k * p;
    let mut comp = DMatrix::zeros(n, n);
    for (l, a) in coef.iter().enumerate() {
        comp.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    for i in k..n {
        comp[(i, i - k)] = 1.0;
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Equation-by-equation least squares with intercept. The innovation
/// covariance uses the divisor `T* - Kp - 1`.
pub fn var_ols(window: DMatrixView<'_, f64>, p: usize) -> Result<VarFit> {
    let (rows, k) = window.shape();
    if p == 0 {
        return Err(Error::InvalidInput(
            "VAR lag order must be at least 1".into(),
        ));
    }
    let required = k * p + 11;
    if rows < required {
        return Err(Error::InsufficientRows { rows, required });
    }
    let fit = varfit::fit(window, p, p)?;
    let t_eff = rows - p;
    let sigma = fit.residual_covariance((t_eff - k * p - 1) as f64);
    let coef: Vec<DMatrix<f64>> = (1..=p).map(|l| fit.lag_matrix(l)).collect();
    let intercept = fit.params.row(0).transpose();
    let spectral_radius = companion_radius(&coef, k);
    let mut out = VarFit {
        p,
        coef,
        intercept,
        sigma,
        spectral_radius,
        warnings: Vec::new(),
    };
    out.note_stability();
    Ok(out)
}

/// Moving-average matrices `A_0 = I`, `A_h = Σ_{ℓ=1..min(h,p)} coef_ℓ A_{h-ℓ}`
/// for `h < horizon`.
pub fn ma_coefficients(fit: &VarFit, horizon: usize) -> Vec<DMatrix<f64>> {
    let k = fit.n_series();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    for h in 0..horizon {
        if h == 0 {
            out.push(DMatrix::identity(k, k));
            continue;
        }
        let mut a = DMatrix::zeros(k, k);
        for l in 1..=h.min(fit.p) {
            a += &fit.coef[l - 1] * &out[h - l];
        }
        out.push(a);
    }
    out
}

/// Row-normalized generalized FEVD.
#[derive(Debug, Clone, PartialEq)]
pub struct GfevdTable {
    pub horizon: usize,
    /// `values[(i, j)]`: share of the forecast error variance of `i` due to
    /// shocks in `j`.
    pub values: DMatrix<f64>,
    /// Shares before row normalization.
    pub raw: DMatrix<f64>,
}

pub fn gfevd(fit: &VarFit, horizon: usize) -> Result<GfevdTable> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let k = fit.n_series();
    let sigma = &fit.sigma;
    if let Some(j) = (0..k).find(|&j| sigma[(j, j)].is_nan() || sigma[(j, j)] <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "innovation variance of series {j} is not positive"
        )));
    }
    let ma = ma_coefficients(fit, horizon);
    let mut num = DMatrix::zeros(k, k);
    let mut den = DVector::zeros(k);
    for a in &ma {
        let a_sigma = a * sigma;
        num += a_sigma.map(|v| v * v);
        den += (&a_sigma * a.transpose()).diagonal();
    }
    let raw = DMatrix::from_fn(k, k, |i, j| num[(i, j)] / (sigma[(j, j)] * den[i]));
    let mut values = raw.clone();
    for mut row in values.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok(GfevdTable {
        horizon,
        raw,
        values,
    })
}

/// Connectedness measures of a GFEVD table. The DY decomposition has no
/// contemporaneous/lagged split, so every value is carried in the lagged
/// slot and the table is flagged accordingly.
pub fn dy_measures(
    table: &GfevdTable,
    names: &[String],
    percent: bool,
) -> Result<ConnectednessTable> {
    let k = table.values.nrows();
    let zero = DMatrix::zeros(k, k);
    let mut t = connectedness::measures(&zero, &table.values, names, percent)?;
    t.split_applicable = false;
    Ok(t)
}

/// DY connectedness of one window.
pub fn window_table(
    window: DMatrixView<'_, f64>,
    p: usize,
    horizon: usize,
    names: &[String],
    percent: bool,
) -> Result<(ConnectednessTable, Vec<String>)> {
    let fit = var_ols(window, p)?;
    let table = gfevd(&fit, horizon)?;
    Ok((dy_measures(&table, names, percent)?, fit.warnings))
}

/// Rolling-window DY connectedness on the same windows as the R² engine.
pub fn rolling_dy(
    returns: &ReturnPanel,
    window: usize,
    p: usize,
    horizon: usize,
    percent: bool,
) -> Result<DynamicSeries> {
    let names = returns.names().to_vec();
    connectedness::run_windows(returns, window, percent, |w| {
        let (table, warnings) = window_table(w, p, horizon, &names, percent)?;
        Ok((table, p, warnings))
    })
}
