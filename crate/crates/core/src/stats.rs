//! Descriptive moments and the Pearson, Spearman and Kendall correlation
//! estimators.
//!
//! The `*_coefficient` functions feed the correlation inputs of the R²
//! decomposition; [`pearson`], [`spearman`] and [`kendall`] also return
//! two-sided p-values for reporting.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Population moments of a series plus the Jarque-Bera statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jb_statistic: f64,
}

/// Mean, variance, skewness, excess kurtosis and Jarque-Bera statistic,
/// all with the biased `1/n` normalizer.
pub fn moments(series: &[f64]) -> Result<MomentSummary> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientRows {
            rows: n,
            required: 4,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jb_statistic = nf / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    Ok(MomentSummary {
        n,
        mean,
        variance: m2,
        skewness,
        excess_kurtosis,
        jb_statistic,
    })
}

/// Which correlation estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 3] = [Self::Pearson, Self::Spearman, Self::Kendall];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pearson => "pearson",
            Self::Spearman => "spearman",
            Self::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pearson" => Ok(Self::Pearson),
            "spearman" => Ok(Self::Spearman),
            "kendall" => Ok(Self::Kendall),
            other => Err(Error::InvalidInput(format!(
                "unknown correlation kind '{other}'"
            ))),
        }
    }
}

/// A correlation estimate with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub p_value: f64,
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::InsufficientRows {
            rows: x.len(),
            required: min,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite input".into()));
    }
    Ok(())
}

/// Pearson's r.
pub fn pearson_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate("constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a product-moment style coefficient from the
/// t distribution with `n - 2` degrees of freedom.
fn t_test_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Estimate> {
    let value = pearson_coefficient(x, y)?;
    Ok(Estimate {
        value,
        p_value: t_test_p_value(value, x.len()),
    })
}

/// Average ranks (1-based); ties share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman's rho: Pearson's r of the average-rank transforms.
pub fn spearman_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    pearson_coefficient(&average_ranks(x), &average_ranks(y))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Estimate> {
    let value = spearman_coefficient(x, y)?;
    Ok(Estimate {
        value,
        p_value: t_test_p_value(value, x.len()),
    })
}

/// Pair counts behind Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KendallCounts {
    pub n: usize,
    /// Concordant minus discordant pairs.
    pub s: i64,
    /// Pairs tied in x.
    pub tied_x: u64,
    /// Pairs tied in y.
    pub tied_y: u64,
    /// Pairs tied in both.
    pub tied_xy: u64,
}

impl KendallCounts {
    pub fn pairs(&self) -> u64 {
        let n = self.n as u64;
        n * (n - 1) / 2
    }

    /// Tau-b, or an error when every pair is tied in either argument.
    pub fn tau_b(&self) -> Result<f64> {
        let n0 = self.pairs();
        let (dx, dy) = (n0 - self.tied_x, n0 - self.tied_y);
        if dx == 0 || dy == 0 {
            return Err(Error::Degenerate("all pairs tied".into()));
        }
        Ok((self.s as f64 / ((dx as f64) * (dy as f64)).sqrt()).clamp(-1.0, 1.0))
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite inputs")
}

/// Sums of `t(t-1)/2`, `t(t-1)(t-2)` and `t(t-1)(2t+5)` over tie groups of a
/// sorted slice.
fn tie_sums(sorted: &[f64]) -> (u64, f64, f64) {
    let (mut pairs, mut s0, mut s1) = (0u64, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        if t > 1 {
            let tf = t as f64;
            pairs += t * (t - 1) / 2;
            s0 += tf * (tf - 1.0) * (tf - 2.0);
            s1 += tf * (tf - 1.0) * (2.0 * tf + 5.0);
        }
        i = j;
    }
    (pairs, s0, s1)
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_sort_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_inversions(&mut v[..mid], &mut buf[..mid]);
    swaps += merge_sort_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

struct KendallWork {
    counts: KendallCounts,
    x_ties: (f64, f64),
    y_ties: (f64, f64),
}

fn kendall_work(x: &[f64], y: &[f64]) -> Result<KendallWork> {
    check_pair(x, y, 3)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cmp_f64(x[a], x[b]).then_with(|| cmp_f64(y[a], y[b])));

    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let (tied_x, x0, x1) = tie_sums(&xs);

    let mut tied_xy = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] && y[idx[j]] == y[idx[i]] {
            j += 1;
        }
        let t = (j - i) as u64;
        tied_xy += t * (t - 1) / 2;
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_sort_inversions(&mut ys, &mut buf);
    let (tied_y, y0, y1) = tie_sums(&ys);

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let s = n0 as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * discordant as i64;
    Ok(KendallWork {
        counts: KendallCounts {
            n,
            s,
            tied_x,
            tied_y,
            tied_xy,
        },
        x_ties: (x0, x1),
        y_ties: (y0, y1),
    })
}

/// Pair counts in `O(n log n)` via merge-sort inversion counting.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> Result<KendallCounts> {
    Ok(kendall_work(x, y)?.counts)
}

/// Kendall's tau-b.
pub fn kendall_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    kendall_counts(x, y)?.tau_b()
}

/// Kendall's tau-b with the tie-corrected normal approximation for `S`.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<Estimate> {
    let work = kendall_work(x, y)?;
    let c = work.counts;
    let value = c.tau_b()?;
    let n = c.n as f64;
    let m = n * (n - 1.0);
    let (x0, x1) = work.x_ties;
    let (y0, y1) = work.y_ties;
    let var_s = (m * (2.0 * n + 5.0) - x1 - y1) / 18.0
        + 2.0 * (c.tied_x as f64) * (c.tied_y as f64) / m
        + x0 * y0 / (9.0 * m * (n - 2.0));
    let p_value = if var_s > 0.0 {
        let z = c.s as f64 / var_s.sqrt();
        (2.0 * Normal::standard().sf(z.abs())).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(Estimate { value, p_value })
}

/// Coefficient of the requested kind.
pub fn coefficient(kind: CorrelationKind, x: &[f64], y: &[f64]) -> Result<f64> {
    match kind {
        CorrelationKind::Pearson => pearson_coefficient(x, y),
        CorrelationKind::Spearman => spearman_coefficient(x, y),
        CorrelationKind::Kendall => kendall_coefficient(x, y),
    }
}

/// Coefficient and p-value of the requested kind.
pub fn estimate(kind: CorrelationKind, x: &[f64], y: &[f64]) -> Result<Estimate> {
    match kind {
        CorrelationKind::Pearson => pearson(x, y),
        CorrelationKind::Spearman => spearman(x, y),
        CorrelationKind::Kendall => kendall(x, y),
    }
}

/// Pairwise correlations between the columns of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub kind: CorrelationKind,
    pub values: DMatrix<f64>,
    pub pvalues: DMatrix<f64>,
}

fn columns(data: DMatrixView<'_, f64>) -> Vec<Vec<f64>> {
    data.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

/// Correlations and p-values for every column pair of `data`.
pub fn correlation_matrix(
    data: DMatrixView<'_, f64>,
    kind: CorrelationKind,
) -> Result<CorrelationMatrix> {
    let cols = columns(data);
    let k = cols.len();
    let mut values = DMatrix::identity(k, k);
    let mut pvalues = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let e = estimate(kind, &cols[i], &cols[j]).map_err(|e| Error::Pair {
                i,
                j,
                source: Box::new(e),
            })?;
            values[(i, j)] = e.value;
            values[(j, i)] = e.value;
            pvalues[(i, j)] = e.p_value;
            pvalues[(j, i)] = e.p_value;
        }
    }
    Ok(CorrelationMatrix {
        kind,
        values,
        pvalues,
    })
}

/// Coefficient-only correlation matrix of the columns of `data`.
///
/// Pearson and Spearman go through one centred cross-product; Kendall is
/// evaluated pair by pair. A constant column is reported as
/// [`Error::Degenerate`] carrying its index.
pub fn coefficient_matrix(data: &DMatrix<f64>, kind: CorrelationKind) -> Result<DMatrix<f64>> {
    let (n, k) = data.shape();
    if n < 3 {
        return Err(Error::InsufficientRows {
            rows: n,
            required: 3,
        });
    }
    let constant = |c: usize| {
        let col = data.column(c);
        let first = col[0];
        col.iter().all(|&v| v == first)
    };
    if let Some(c) = (0..k).find(|&c| constant(c)) {
        return Err(Error::Degenerate(format!("column {c}")));
    }
    match kind {
        CorrelationKind::Pearson => Ok(product_moment(data.clone())),
        CorrelationKind::Spearman => {
            let mut ranked = DMatrix::zeros(n, k);
            for c in 0..k {
                let col: Vec<f64> = data.column(c).iter().copied().collect();
                ranked.set_column(c, &nalgebra::DVector::from_vec(average_ranks(&col)));
            }
            Ok(product_moment(ranked))
        }
        CorrelationKind::Kendall => {
            let cols = columns(data.as_view());
            let mut out = DMatrix::identity(k, k);
            for i in 0..k {
                for j in i + 1..k {
                    let tau = kendall_coefficient(&cols[i], &cols[j]).map_err(|e| Error::Pair {
                        i,
                        j,
                        source: Box::new(e),
                    })?;
                    out[(i, j)] = tau;
                    out[(j, i)] = tau;
                }
            }
            Ok(out)
        }
    }
}

fn product_moment(mut data: DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    for mut col in data.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        col /= norm;
    }
    let mut r = data.tr_mul(&data);
    let k = r.nrows();
    for i in 0..k {
        for j in i + 1..k {
            let v = (0.5 * (r[(i, j)] + r[(j, i)])).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
        r[(i, i)] = 1.0;
    }
    r
}
