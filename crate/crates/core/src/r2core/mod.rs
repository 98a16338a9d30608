//! R² decomposition of the contemporaneous-plus-lagged regression system.
//!
//! Every series `k` is regressed on the same-period values of the other
//! series and on `p` lags of all series. The regressors are orthogonalized
//! through the symmetric square root `C` of their correlation matrix, and
//! the regression R² is allocated to regressor `j` as
//! `Σ_m C[j][m]² · w[m]²` with `w = C⁻¹ R_yx`. Stacking the allocations of
//! all equations gives one `K × K` block per lag.

pub mod eigen;

pub use eigen::{jacobi_eigen, symmetric_eigen, SymmetricEigen};

use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{self, CorrelationKind};

/// Eigenvalues below this are lifted to it before taking square roots.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Most negative eigenvalue tolerated as rounding noise.
pub const EIGEN_NEG_TOL: f64 = -1e-8;
/// Largest asymmetry accepted for a "symmetric" input.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Largest decomposed R² accepted before the inputs are declared invalid.
pub const R2_MAX: f64 = 1.0 + 1e-6;
/// Observations required beyond the number of regressors.
pub const EXTRA_ROWS: usize = 10;

/// Regressor layout of equation `k`: the other series at lag 0, then every
/// series (own series included) at lags `1..=p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub k: usize,
    pub n_series: usize,
    pub p: usize,
    /// `(series, lag)` per regressor column.
    pub column_map: Vec<(usize, usize)>,
}

impl DesignSpec {
    pub fn new(n_series: usize, k: usize, p: usize) -> Result<Self> {
        if k >= n_series {
            return Err(Error::IndexOutOfRange {
                index: k,
                k: n_series,
            });
        }
        let mut column_map = Vec::with_capacity(n_series * (p + 1) - 1);
        column_map.extend((0..n_series).filter(|&j| j != k).map(|j| (j, 0)));
        for lag in 1..=p {
            column_map.extend((0..n_series).map(|j| (j, lag)));
        }
        Ok(Self {
            k,
            n_series,
            p,
            column_map,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.column_map.len()
    }

    /// Rows a window needs so that every regression is overdetermined.
    pub fn min_rows(n_series: usize, p: usize) -> usize {
        n_series * (p + 1) + EXTRA_ROWS
    }
}

/// Demeaned regression data of one equation.
#[derive(Debug, Clone)]
pub struct Design {
    pub lhs: DVector<f64>,
    pub rhs: DMatrix<f64>,
    pub spec: DesignSpec,
}

fn check_rows(rows: usize, n_series: usize, p: usize) -> Result<()> {
    let required = DesignSpec::min_rows(n_series, p);
    if rows < required {
        return Err(Error::InsufficientRows { rows, required });
    }
    Ok(())
}

/// Lag stack of a window: row `t - p` holds `y_{t-lag, j}` in column
/// `lag * K + j`, for `t = p..n`.
fn lag_stack(window: &DMatrixView<'_, f64>, p: usize) -> DMatrix<f64> {
    let (n, k) = window.shape();
    DMatrix::from_fn(n - p, k * (p + 1), |r, c| {
        let (lag, j) = (c / k, c % k);
        window[(r + p - lag, j)]
    })
}

fn demean(mut v: DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    v
}

fn constant_column(stack: &DMatrix<f64>, n_series: usize) -> Option<(usize, usize)> {
    stack.column_iter().enumerate().find_map(|(c, col)| {
        let first = col[0];
        col.iter()
            .all(|&v| v == first)
            .then_some((c % n_series, c / n_series))
    })
}

/// Builds the demeaned left- and right-hand side of equation `k`.
pub fn build_design(window: DMatrixView<'_, f64>, k: usize, p: usize) -> Result<Design> {
    let (rows, n_series) = window.shape();
    let spec = DesignSpec::new(n_series, k, p)?;
    check_rows(rows, n_series, p)?;
    let stack = lag_stack(&window, p);
    let n = stack.nrows();
    let mut rhs = DMatrix::zeros(n, spec.n_columns());
    for (c, &(j, lag)) in spec.column_map.iter().enumerate() {
        let col = stack.column(lag * n_series + j).into_owned();
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::ConstantColumn { series: j, lag });
        }
        rhs.set_column(c, &demean(col));
    }
    let lhs = stack.column(k).into_owned();
    if lhs.iter().all(|&v| v == lhs[0]) {
        return Err(Error::ConstantColumn { series: k, lag: 0 });
    }
    Ok(Design {
        lhs: demean(lhs),
        rhs,
        spec,
    })
}

/// Symmetric square root of a correlation matrix and its inverse.
#[derive(Debug, Clone)]
pub struct SymmetricSqrt {
    pub root: DMatrix<f64>,
    pub inverse_root: DMatrix<f64>,
    /// Raw eigenvalues, ascending.
    pub eigenvalues: DVector<f64>,
    /// Number of slightly negative eigenvalues lifted to the floor.
    pub clamped_negative: usize,
}

/// `C = V Λ^{1/2} Vᵀ` with eigenvalues floored at [`EIGEN_FLOOR`].
pub fn symmetric_sqrt(r: &DMatrix<f64>) -> Result<SymmetricSqrt> {
    if r.nrows() != r.ncols() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            got: r.ncols(),
        });
    }
    let asym = (r - r.transpose()).amax();
    if asym.is_nan() || asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = symmetric_eigen(r);
    if let Some(&min) = eig.eigenvalues.iter().next() {
        if min < EIGEN_NEG_TOL || !min.is_finite() {
            return Err(Error::NegativeEigenvalue(min));
        }
    }
    let clamped_negative = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let symmetrize = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let root = symmetrize(eig.reconstruct_with(|l| l.max(EIGEN_FLOOR).sqrt()));
    let inverse_root = symmetrize(eig.reconstruct_with(|l| 1.0 / l.max(EIGEN_FLOOR).sqrt()));
    Ok(SymmetricSqrt {
        root,
        inverse_root,
        eigenvalues: eig.eigenvalues,
        clamped_negative,
    })
}

/// R² allocation of one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionVector {
    /// Share of R² per regressor, aligned with the regressor order.
    pub contributions: DVector<f64>,
    pub r_squared: f64,
    pub clamped_negative: usize,
}

/// Allocates the regression R² implied by `r_xx` and `r_yx` across the
/// regressors.
pub fn decompose_r2(r_xx: &DMatrix<f64>, r_yx: &DVector<f64>) -> Result<DecompositionVector> {
    if r_yx.len() != r_xx.nrows() {
        return Err(Error::DimensionMismatch {
            expected: r_xx.nrows(),
            got: r_yx.len(),
        });
    }
    if r_yx.iter().any(|v| v.is_nan() || v.abs() > 1.0) {
        return Err(Error::InvalidInput(
            "target correlations must lie in [-1, 1]".into(),
        ));
    }
    let sqrt = symmetric_sqrt(r_xx)?;
    let w = &sqrt.inverse_root * r_yx;
    let w2 = w.map(|v| v * v);
    let c2 = sqrt.root.map(|v| v * v);
    let contributions = c2 * w2;
    let r_squared = contributions.sum();
    if r_squared.is_nan() || r_squared > R2_MAX {
        return Err(Error::InvalidRSquared(r_squared));
    }
    Ok(DecompositionVector {
        contributions,
        r_squared,
        clamped_negative: sqrt.clamped_negative,
    })
}

/// Stacked R² allocations of all `K` equations.
///
/// `blocks[lag][(k, j)]` is the share of equation `k`'s R² attributed to
/// series `j` at that lag.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionMatrix {
    pub n_series: usize,
    pub p: usize,
    pub blocks: Vec<DMatrix<f64>>,
    pub r_squared: DVector<f64>,
    pub warnings: Vec<String>,
}

/// Runs the decomposition for every equation of a window.
pub fn full_decomposition(
    window: DMatrixView<'_, f64>,
    p: usize,
    kind: CorrelationKind,
) -> Result<DecompositionMatrix> {
    let (rows, n_series) = window.shape();
    check_rows(rows, n_series, p)?;
    let stack = lag_stack(&window, p);
    if let Some((series, lag)) = constant_column(&stack, n_series) {
        return Err(Error::ConstantColumn { series, lag });
    }
    let corr = stats::coefficient_matrix(&stack, kind)?;

    let per_equation: Vec<Result<(DesignSpec, DecompositionVector)>> = (0..n_series)
        .into_par_iter()
        .map(|k| {
            let spec = DesignSpec::new(n_series, k, p)?;
            let idx: Vec<usize> = spec
                .column_map
                .iter()
                .map(|&(j, lag)| lag * n_series + j)
                .collect();
            let r_xx = corr.select_rows(&idx).select_columns(&idx);
            let r_yx = DVector::from_iterator(idx.len(), idx.iter().map(|&c| corr[(k, c)]));
            let dec = decompose_r2(&r_xx, &r_yx).map_err(|e| Error::Equation {
                k,
                source: Box::new(e),
            })?;
            Ok((spec, dec))
        })
        .collect();

    let mut blocks = vec![DMatrix::zeros(n_series, n_series); p + 1];
    let mut r_squared = DVector::zeros(n_series);
    let mut warnings = Vec::new();
    for result in per_equation {
        let (spec, dec) = result?;
        for (c, &(j, lag)) in spec.column_map.iter().enumerate() {
            blocks[lag][(spec.k, j)] = dec.contributions[c].max(0.0);
        }
        r_squared[spec.k] = dec.r_squared;
        if dec.clamped_negative > 0 {
            warnings.push(format!(
                "equation {}: {} negative eigenvalue(s) clamped",
                spec.k, dec.clamped_negative
            ));
        }
    }
    Ok(DecompositionMatrix {
        n_series,
        p,
        blocks,
        r_squared,
        warnings,
    })
}

/// Contemporaneous block and the sum of the lag blocks.
pub fn split(d: &DecompositionMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let contemp = d.blocks[0].clone();
    let lagged = d.blocks[1..]
        .iter()
        .fold(DMatrix::zeros(d.n_series, d.n_series), |acc, b| acc + b);
    (contemp, lagged)
}
