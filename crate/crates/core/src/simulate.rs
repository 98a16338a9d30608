//! Seeded data generators for simulation studies and demo panels.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::panel::PricePanel;

const BURN_IN: usize = 200;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `n × k` independent standard normal draws.
pub fn white_noise(k: usize, n: usize, seed: u64) -> DMatrix<f64> {
    normal_matrix(&mut rng(seed), n, k)
}

/// Simulates `y_t = Σ coefs[ℓ-1] y_{t-ℓ} + L e_t` with `e_t ~ N(0, I)`,
/// where `L` is a Cholesky factor of `sigma`. Returns `n` rows after a
/// burn-in period.
pub fn var_process(
    coefs: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let k = sigma.nrows();
    if coefs.iter().any(|c| c.shape() != (k, k)) {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: coefs.first().map_or(0, |c| c.nrows()),
        });
    }
    let chol = sigma.clone().cholesky().ok_or_else(|| {
        Error::InvalidInput("innovation covariance must be positive definite".into())
    })?;
    let l = chol.l();
    let total = n + BURN_IN;
    let shocks = normal_matrix(&mut rng(seed), total, k);
    let mut y = DMatrix::zeros(total, k);
    for t in 0..total {
        let mut row: DVector<f64> = &l * shocks.row(t).transpose();
        for (lag, a) in coefs.iter().enumerate() {
            if t > lag {
                row += a * y.row(t - lag - 1).transpose();
            }
        }
        y.set_row(t, &row.transpose());
    }
    Ok(y.rows(BURN_IN, n).into_owned())
}

/// VAR(1) where series 0 enters every other equation at lag 1 with
/// coefficient `strength`; all innovations independent.
pub fn planted_transmitter(k: usize, n: usize, strength: f64, seed: u64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(k, k);
    for i in 1..k {
        a[(i, 0)] = strength;
    }
    var_process(&[a], &DMatrix::identity(k, k), n, seed).expect("identity covariance")
}

/// A random valid pair `(R_xx, R_yx)` of dimension `dim`, taken from a
/// random `(dim + 1)`-dimensional correlation matrix with the target in
/// position 0.
pub fn random_correlation_system(dim: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng(seed);
    let m = dim + 1;
    let a = normal_matrix(&mut r, m, m);
    let ridge = r.random_range(0.01..1.0) * m as f64;
    let cov = a.transpose() * a + DMatrix::identity(m, m) * ridge;
    let sd = cov.diagonal().map(f64::sqrt);
    let corr = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    });
    let r_xx = corr.view((1, 1), (dim, dim)).into_owned();
    let r_yx = corr.view((1, 0), (dim, 1)).column(0).into_owned();
    (r_xx, r_yx)
}

/// Random stable VAR(p) coefficients: entries uniform in `±0.5 / (K p)`,
/// which bounds every row sum of absolute values below 0.5.
pub fn random_stable_coefs(k: usize, p: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut r = rng(seed);
    let bound = 0.5 / (k * p) as f64;
    (0..p)
        .map(|_| DMatrix::from_fn(k, k, |_, _| r.random_range(-bound..bound)))
        .collect()
}

/// Random symmetric positive definite covariance with unit-scale diagonal.
pub fn random_covariance(k: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = normal_matrix(&mut r, k, k);
    (a.transpose() * a) / k as f64 + DMatrix::identity(k, k) * 0.1
}

/// Returns of a `k`-series system with a common factor whose loadings
/// swing slowly over time, lagged spillovers from the first three series,
/// and fat-tailed idiosyncratic shocks.
pub fn regime_returns(k: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let t5 = StudentT::new(5.0).expect("dof > 0");
    let base: Vec<f64> = (0..k).map(|_| r.random_range(0.4..1.2)).collect();
    let vol: Vec<f64> = (0..k).map(|_| r.random_range(0.008..0.02)).collect();
    let mut y = DMatrix::zeros(n + 1, k);
    for t in 1..=n {
        let phase = (t as f64 / 260.0) * std::f64::consts::TAU;
        let intensity = 0.15 + 0.85 * (0.5 + 0.5 * phase.sin()).powi(2);
        let factor: f64 = StandardNormal.sample(&mut r);
        for i in 0..k {
            let idio: f64 = t5.sample(&mut r) * (3.0f64 / 5.0).sqrt();
            let mut z = intensity * base[i] * factor + idio;
            if i >= 3 {
                z += 0.25 * (y[(t - 1, i % 3)] / vol[i % 3]);
            }
            y[(t, i)] = vol[i] * z;
        }
    }
    y.rows(1, n).into_owned()
}

/// Business days (Monday to Friday) starting at `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

/// Price panel with `n_prices` rows built from [`regime_returns`], with
/// roughly `missing_rate` of the cells after the first row left absent.
pub fn synthetic_price_panel(
    k: usize,
    n_prices: usize,
    missing_rate: f64,
    seed: u64,
) -> Result<PricePanel> {
    let returns = regime_returns(k, n_prices - 1, seed);
    let mut r = rng(seed ^ 0x5eed);
    let start = NaiveDate::from_ymd_opt(2020, 12, 15).expect("valid date");
    let dates = business_days(start, n_prices);
    let names = (1..=k).map(|i| format!("S{i:02}")).collect();
    let mut level: Vec<f64> = (0..k).map(|_| r.random_range(20.0..500.0)).collect();
    let mut rows = Vec::with_capacity(n_prices);
    for (t, date) in dates.into_iter().enumerate() {
        if t > 0 {
            for (i, l) in level.iter_mut().enumerate() {
                *l *= returns[(t - 1, i)].exp();
            }
        }
        let cells = level
            .iter()
            .map(|&p| {
                let price = (p * 1e4).round() / 1e4;
                (t == 0 || r.random::<f64>() >= missing_rate).then_some(price)
            })
            .collect();
        rows.push((date, cells));
    }
    PricePanel::from_rows(names, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(white_noise(3, 10, 7), white_noise(3, 10, 7));
        assert_ne!(white_noise(3, 10, 7), white_noise(3, 10, 8));
        assert_eq!(regime_returns(5, 50, 1), regime_returns(5, 50, 1));
    }

    #[test]
    fn random_correlation_system_is_valid() {
        for seed in 0..20 {
            let (r_xx, r_yx) = random_correlation_system(6, seed);
            assert!(r_xx.diagonal().iter().all(|&d| d == 1.0));
            assert!(r_yx.iter().all(|v| v.abs() < 1.0));
            assert!(nalgebra::SymmetricEigen::new(r_xx).eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn business_days_skip_weekends() {
        let start = NaiveDate::from_ymd_opt(2020, 12, 15).unwrap();
        let d = business_days(start, 773);
        assert_eq!(d.len(), 773);
        assert!(d.iter().all(|d| d.weekday().num_days_from_monday() < 5));
    }

    #[test]
    fn synthetic_panel_shape() {
        let p = synthetic_price_panel(19, 773, 0.01, 3).unwrap();
        assert_eq!((p.n_rows(), p.n_series()), (773, 19));
        assert!(!p.is_complete());
    }
}
