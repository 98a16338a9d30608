use nalgebra::DMatrix;
use spillover_core::connectedness::rolling;
use spillover_core::dybench::rolling_dy;
use spillover_core::{
    simulate, CorrelationKind, DynamicSeries, LagSelection, ReturnPanel, RollingConfig,
};

fn system(n: usize, seed: u64) -> ReturnPanel {
    ReturnPanel::from_matrix(simulate::regime_returns(5, n, seed)).unwrap()
}

fn config(kind: CorrelationKind) -> RollingConfig {
    RollingConfig {
        window: 80,
        lag: LagSelection::Fixed(1),
        kind,
        percent: true,
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let r = system(200, 1);
    for kind in CorrelationKind::ALL {
        let a = in_pool(1, || rolling(&r, &config(kind)).unwrap());
        let b = in_pool(4, || rolling(&r, &config(kind)).unwrap());
        assert_eq!(a, b, "{kind}");
    }
    let a = in_pool(1, || rolling_dy(&r, 80, 2, 10, true).unwrap());
    let b = in_pool(3, || rolling_dy(&r, 80, 2, 10, true).unwrap());
    assert_eq!(a, b);
}

#[test]
fn relabelling_series_permutes_every_measure() {
    let r = system(150, 2);
    let perm = [3usize, 0, 4, 1, 2];
    let permuted = DMatrix::from_fn(r.n_rows(), 5, |t, c| r.values()[(t, perm[c])]);
    let rp = ReturnPanel::from_matrix(permuted).unwrap();
    let a = rolling(&r, &config(CorrelationKind::Pearson)).unwrap();
    let b = rolling(&rp, &config(CorrelationKind::Pearson)).unwrap();
    for (ta, tb) in a.tables.iter().zip(&b.tables) {
        assert!((ta.tci.overall - tb.tci.overall).abs() < 1e-9);
        for (c, &src) in perm.iter().enumerate() {
            assert!((tb.net[c].contemp - ta.net[src].contemp).abs() < 1e-9);
            assert!((tb.net[c].lagged - ta.net[src].lagged).abs() < 1e-9);
            for (d, &dst) in perm.iter().enumerate() {
                let (x, y) = (tb.pairwise[c][d], ta.pairwise[src][dst]);
                assert!((x.overall - y.overall).abs() < 1e-9);
            }
        }
    }
}

fn max_tci_gap(a: &DynamicSeries, b: &DynamicSeries) -> f64 {
    a.tables
        .iter()
        .zip(&b.tables)
        .map(|(x, y)| {
            (x.tci.overall - y.tci.overall)
                .abs()
                .max((x.tci.lagged - y.tci.lagged).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn rank_estimators_ignore_monotone_transforms() {
    let r = system(150, 3);
    let bent = ReturnPanel::from_matrix(r.values().map(|v| (50.0 * v).sinh() + v.powi(3))).unwrap();
    for kind in [CorrelationKind::Spearman, CorrelationKind::Kendall] {
        let a = rolling(&r, &config(kind)).unwrap();
        let b = rolling(&bent, &config(kind)).unwrap();
        assert!(max_tci_gap(&a, &b) < 1e-9, "{kind}");
    }
    let a = rolling(&r, &config(CorrelationKind::Pearson)).unwrap();
    let b = rolling(&bent, &config(CorrelationKind::Pearson)).unwrap();
    assert!(max_tci_gap(&a, &b) > 1e-6);
}

#[test]
fn per_window_lag_selection() {
    let r = system(260, 4);
    let cfg = RollingConfig {
        window: 120,
        lag: LagSelection::Auto {
            p_max: 3,
            per_window: true,
        },
        ..config(CorrelationKind::Pearson)
    };
    let s = rolling(&r, &cfg).unwrap();
    assert_eq!(s.len(), 260 - 120 + 1);
    assert!(s.lags.iter().all(|p| (1..=3).contains(p)));
    assert_eq!(s.failed_windows(), 0);
}

#[test]
fn percent_scaling_only_changes_units() {
    let r = system(120, 5);
    let pct = rolling(&r, &config(CorrelationKind::Pearson)).unwrap();
    let raw = rolling(
        &r,
        &RollingConfig {
            percent: false,
            ..config(CorrelationKind::Pearson)
        },
    )
    .unwrap();
    for (a, b) in pct.tables.iter().zip(&raw.tables) {
        assert!((a.tci.overall - 100.0 * b.tci.overall).abs() < 1e-10);
        assert!((a.from[2].lagged - 100.0 * b.from[2].lagged).abs() < 1e-10);
    }
}
