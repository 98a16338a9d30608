//! Connectedness measures built from the decomposition blocks, lag order
//! selection and the rolling-window engine.

use std::ops::{Add, Sub};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DMatrixView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{self, ReturnPanel};
use crate::r2core::{self, DesignSpec};
use crate::stats::CorrelationKind;
use crate::varfit;

/// Serializes non-finite floats as JSON `null` and reads `null` back as NaN.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// A measure split into its contemporaneous and lagged parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    #[serde(with = "nan_as_null")]
    pub overall: f64,
    #[serde(with = "nan_as_null")]
    pub contemp: f64,
    #[serde(with = "nan_as_null")]
    pub lagged: f64,
}

impl Triple {
    pub const ZERO: Triple = Triple {
        overall: 0.0,
        contemp: 0.0,
        lagged: 0.0,
    };
    pub const NAN: Triple = Triple {
        overall: f64::NAN,
        contemp: f64::NAN,
        lagged: f64::NAN,
    };

    pub fn new(contemp: f64, lagged: f64) -> Self {
        Self {
            overall: contemp + lagged,
            contemp,
            lagged,
        }
    }

    pub fn scale(self, f: f64) -> Self {
        Self::new(self.contemp * f, self.lagged * f)
    }

    pub fn is_finite(&self) -> bool {
        self.overall.is_finite() && self.contemp.is_finite() && self.lagged.is_finite()
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Overall => self.overall,
            Component::Contemp => self.contemp,
            Component::Lagged => self.lagged,
        }
    }
}

impl Add for Triple {
    type Output = Triple;
    fn add(self, o: Triple) -> Triple {
        Triple::new(self.contemp + o.contemp, self.lagged + o.lagged)
    }
}

impl Sub for Triple {
    type Output = Triple;
    fn sub(self, o: Triple) -> Triple {
        Triple::new(self.contemp - o.contemp, self.lagged - o.lagged)
    }
}

/// Which part of a [`Triple`] to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Overall,
    Contemp,
    Lagged,
}

impl Component {
    pub const ALL: [Component; 3] = [Self::Overall, Self::Contemp, Self::Lagged];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Overall => "overall",
            Self::Contemp => "contemp",
            Self::Lagged => "lagged",
        }
    }
}

/// Full battery of connectedness measures for one system.
///
/// `pairwise[i][j]` is the contribution of series `j` to series `i`. The
/// diagonal carries only own-lag contributions and is excluded from `to`,
/// `from`, `net` and `tci`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessTable {
    pub names: Vec<String>,
    pub percent: bool,
    /// False when the measures do not have a contemporaneous/lagged split
    /// (the GFEVD baseline); the whole value then sits in `lagged`.
    pub split_applicable: bool,
    pub pairwise: Vec<Vec<Triple>>,
    pub to: Vec<Triple>,
    pub from: Vec<Triple>,
    pub net: Vec<Triple>,
    pub inc_own: Vec<Triple>,
    pub tci: Triple,
    #[serde(with = "vec_nan_as_null")]
    pub own_lag: Vec<f64>,
    /// Average R² across equations, own lags included.
    pub mean_r_squared: Triple,
}

mod vec_nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::NAN))
            .collect())
    }
}

impl ConnectednessTable {
    /// Table with every measure set to NaN, used for failed windows.
    pub fn nan(names: Vec<String>, percent: bool) -> Self {
        let k = names.len();
        Self {
            names,
            percent,
            split_applicable: true,
            pairwise: vec![vec![Triple::NAN; k]; k],
            to: vec![Triple::NAN; k],
            from: vec![Triple::NAN; k],
            net: vec![Triple::NAN; k],
            inc_own: vec![Triple::NAN; k],
            tci: Triple::NAN,
            own_lag: vec![f64::NAN; k],
            mean_r_squared: Triple::NAN,
        }
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn is_nan(&self) -> bool {
        self.tci.overall.is_nan()
    }

    /// Net pairwise directional connectedness derived from `pairwise`.
    pub fn npdc(&self) -> NpdcMatrix {
        let k = self.n_series();
        let values = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            Triple::ZERO
                        } else {
                            self.pairwise[i][j] - self.pairwise[j][i]
                        }
                    })
                    .collect()
            })
            .collect();
        NpdcMatrix { values }
    }
}

fn check_pair(r_c: &DMatrix<f64>, r_l: &DMatrix<f64>) -> Result<usize> {
    let k = r_c.nrows();
    for m in [r_c, r_l] {
        for d in [m.nrows(), m.ncols()] {
            if d != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: d,
                });
            }
        }
    }
    Ok(k)
}

/// TO, FROM, NET, Inc.Own and TCI from the contemporaneous and lagged
/// decomposition matrices. Entry `[i][k]` is the contribution of `k` to `i`.
pub fn measures(
    r_c: &DMatrix<f64>,
    r_l: &DMatrix<f64>,
    names: &[String],
    percent: bool,
) -> Result<ConnectednessTable> {
    let k = check_pair(r_c, r_l)?;
    if names.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: names.len(),
        });
    }
    let f = if percent { 100.0 } else { 1.0 };
    let cell = |i: usize, j: usize| Triple::new(r_c[(i, j)] * f, r_l[(i, j)] * f);
    let pairwise: Vec<Vec<Triple>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        Triple::new(0.0, r_l[(i, i)] * f)
                    } else {
                        cell(i, j)
                    }
                })
                .collect()
        })
        .collect();
    let off = |i: usize, j: usize| if i == j { Triple::ZERO } else { pairwise[i][j] };
    let from: Vec<Triple> = (0..k)
        .map(|i| (0..k).fold(Triple::ZERO, |acc, j| acc + off(i, j)))
        .collect();
    let to: Vec<Triple> = (0..k)
        .map(|i| (0..k).fold(Triple::ZERO, |acc, j| acc + off(j, i)))
        .collect();
    let net: Vec<Triple> = (0..k).map(|i| to[i] - from[i]).collect();
    let own_lag: Vec<f64> = (0..k).map(|i| r_l[(i, i)] * f).collect();
    let inc_own: Vec<Triple> = (0..k)
        .map(|i| to[i] + Triple::new(0.0, own_lag[i]))
        .collect();
    let kf = k as f64;
    let tci = from
        .iter()
        .fold(Triple::ZERO, |acc, &t| acc + t)
        .scale(1.0 / kf);
    let mean_r_squared = Triple::new(r_c.sum() * f / kf, r_l.sum() * f / kf);
    Ok(ConnectednessTable {
        names: names.to_vec(),
        percent,
        split_applicable: true,
        pairwise,
        to,
        from,
        net,
        inc_own,
        tci,
        own_lag,
        mean_r_squared,
    })
}

/// Antisymmetric matrix of net pairwise connectedness.
///
/// `values[i][j] > 0` means `j` explains more of `i` than `i` explains of
/// `j`. Summing column `j` over `i` gives `NET_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpdcMatrix {
    pub values: Vec<Vec<Triple>>,
}

impl NpdcMatrix {
    /// `Σ_i values[i][j]` for every `j`; equals the NET vector.
    pub fn column_sums(&self) -> Vec<Triple> {
        let k = self.values.len();
        (0..k)
            .map(|j| (0..k).fold(Triple::ZERO, |acc, i| acc + self.values[i][j]))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<Triple> {
        self.values
            .iter()
            .map(|row| row.iter().fold(Triple::ZERO, |acc, &t| acc + t))
            .collect()
    }
}

pub fn npdc(r_c: &DMatrix<f64>, r_l: &DMatrix<f64>, percent: bool) -> Result<NpdcMatrix> {
    let k = check_pair(r_c, r_l)?;
    let f = if percent { 100.0 } else { 1.0 };
    let values = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        Triple::ZERO
                    } else {
                        Triple::new(
                            r_c[(i, j)] * f - r_c[(j, i)] * f,
                            r_l[(i, j)] * f - r_l[(j, i)] * f,
                        )
                    }
                })
                .collect()
        })
        .collect();
    Ok(NpdcMatrix { values })
}

/// Log-determinant of a symmetric positive definite matrix.
fn ln_det(m: DMatrix<f64>) -> Result<f64> {
    let chol = m.cholesky().ok_or(Error::Singular)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Bayesian information criterion of VAR(p) fits for `p = 1..=p_max` on the
/// common sample that drops the first `p_max` rows.
pub fn bic_values(window: DMatrixView<'_, f64>, p_max: usize) -> Result<Vec<f64>> {
    let (rows, k) = window.shape();
    if p_max == 0 {
        return Err(Error::InvalidInput("maximum lag must be at least 1".into()));
    }
    let required = k * p_max + 11;
    if rows < required {
        return Err(Error::InsufficientRows { rows, required });
    }
    let t_eff = (rows - p_max) as f64;
    (1..=p_max)
        .map(|p| {
            let fit = varfit::fit(window, p, p_max)?;
            let sigma = fit.residual_covariance(t_eff);
            Ok(ln_det(sigma)? + t_eff.ln() / t_eff * (p * k * k) as f64)
        })
        .collect()
}

/// Lag order minimizing BIC; ties within 1e-12 go to the smaller order.
pub fn bic_lag(window: DMatrixView<'_, f64>, p_max: usize) -> Result<usize> {
    let bic = bic_values(window, p_max)?;
    let mut best = 0;
    for (i, &b) in bic.iter().enumerate().skip(1) {
        if b < bic[best] - 1e-12 {
            best = i;
        }
    }
    Ok(best + 1)
}

/// How the lag order of the rolling engine is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelection {
    Fixed(usize),
    /// BIC over `1..=p_max`, either once on the full sample or per window.
    Auto {
        p_max: usize,
        per_window: bool,
    },
}

impl LagSelection {
    pub fn max_lag(&self) -> usize {
        match *self {
            LagSelection::Fixed(p) => p,
            LagSelection::Auto { p_max, .. } => p_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: usize,
    pub lag: LagSelection,
    pub kind: CorrelationKind,
    pub percent: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: 200,
            lag: LagSelection::Auto {
                p_max: 5,
                per_window: false,
            },
            kind: CorrelationKind::Pearson,
            percent: true,
        }
    }
}

/// Per-window connectedness tables in date order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSeries {
    pub names: Vec<String>,
    pub end_dates: Vec<NaiveDate>,
    pub tables: Vec<ConnectednessTable>,
    /// Lag order used in each window.
    pub lags: Vec<usize>,
    pub warnings: Vec<Vec<String>>,
}

impl DynamicSeries {
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn failed_windows(&self) -> usize {
        self.tables.iter().filter(|t| t.is_nan()).count()
    }

    pub fn tci(&self) -> Vec<Triple> {
        self.tables.iter().map(|t| t.tci).collect()
    }
}

/// One window of the R² engine: decomposition, split and measures.
pub fn window_table(
    window: DMatrixView<'_, f64>,
    p: usize,
    kind: CorrelationKind,
    names: &[String],
    percent: bool,
) -> Result<(ConnectednessTable, Vec<String>)> {
    let d = r2core::full_decomposition(window, p, kind)?;
    let (r_c, r_l) = r2core::split(&d);
    Ok((measures(&r_c, &r_l, names, percent)?, d.warnings))
}

/// Evaluates `f` on every window in parallel, keeping date order, and
/// degrades failed windows to NaN tables.
pub(crate) fn run_windows<F>(
    returns: &ReturnPanel,
    length: usize,
    percent: bool,
    f: F,
) -> Result<DynamicSeries>
where
    F: Fn(DMatrixView<'_, f64>) -> Result<(ConnectednessTable, usize, Vec<String>)> + Sync,
{
    let windows = panel::windows(returns, length)?;
    let results: Vec<_> = windows.par_iter().map(|w| f(returns.window(w))).collect();

    let names = returns.names().to_vec();
    let mut out = DynamicSeries {
        names: names.clone(),
        end_dates: Vec::with_capacity(windows.len()),
        tables: Vec::with_capacity(windows.len()),
        lags: Vec::with_capacity(windows.len()),
        warnings: Vec::with_capacity(windows.len()),
    };
    let mut first_error = None;
    for (w, res) in windows.iter().zip(results) {
        out.end_dates.push(w.end_date);
        match res {
            Ok((table, p, warnings)) => {
                out.tables.push(table);
                out.lags.push(p);
                out.warnings.push(warnings);
            }
            Err(e) => {
                let msg = format!("window ending {} failed: {e}", w.end_date);
                first_error.get_or_insert_with(|| msg.clone());
                out.tables
                    .push(ConnectednessTable::nan(names.clone(), percent));
                out.lags.push(0);
                out.warnings.push(vec![msg]);
            }
        }
    }
    if out.failed_windows() == out.len() {
        return Err(Error::AllWindowsFailed(first_error.unwrap_or_default()));
    }
    Ok(out)
}

/// Lag order for a run: the fixed order, or BIC on the full sample.
pub fn resolve_lag(returns: &ReturnPanel, lag: LagSelection) -> Result<usize> {
    match lag {
        LagSelection::Fixed(p) => Ok(p),
        LagSelection::Auto { p_max, .. } => bic_lag(returns.values().as_view(), p_max),
    }
}

/// Rolling-window R² connectedness.
pub fn rolling(returns: &ReturnPanel, config: &RollingConfig) -> Result<DynamicSeries> {
    let k = returns.n_series();
    let required = DesignSpec::min_rows(k, config.lag.max_lag());
    if config.window < required {
        return Err(Error::InsufficientRows {
            rows: config.window,
            required,
        });
    }
    let names = returns.names().to_vec();
    let fixed = match config.lag {
        LagSelection::Auto {
            per_window: true, ..
        } => None,
        other => Some(resolve_lag(returns, other)?),
    };
    run_windows(returns, config.window, config.percent, |w| {
        let p = match (fixed, config.lag) {
            (Some(p), _) => p,
            (None, LagSelection::Auto { p_max, .. }) => bic_lag(w, p_max)?,
            (None, LagSelection::Fixed(p)) => p,
        };
        let (table, warnings) = window_table(w, p, config.kind, &names, config.percent)?;
        Ok((table, p, warnings))
    })
}
