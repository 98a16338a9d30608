//! One batch run: load, estimate, serialize, and commit the files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spillover_core::connectedness::{self, resolve_lag};
use spillover_core::{
    dybench, panel, stats, Component, ConnectednessTable, DynamicSeries, LagSelection,
    RollingConfig, Triple,
};

use crate::config::{Format, Method, RunConfig};
use crate::error::{RunError, Stage};
use crate::export::{self, json_bytes};

type Measure = fn(&ConnectednessTable) -> &[Triple];

/// A file produced by a run, held in memory until the run succeeds.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub windows: usize,
    pub lag: Option<usize>,
    pub r2_tci: Option<f64>,
    pub dy_tci: Option<f64>,
}

#[derive(Serialize)]
struct InputSummary<'a> {
    path: &'a Path,
    price_rows: usize,
    series: &'a [String],
    absent_cells: usize,
    leading_rows_dropped: usize,
    return_rows: usize,
    first_return_date: String,
    last_return_date: String,
}

#[derive(Serialize)]
struct WindowWarning {
    date: String,
    messages: Vec<String>,
}

#[derive(Serialize)]
struct MethodReport {
    nan_windows: usize,
    /// How many windows used each lag order.
    lag_counts: BTreeMap<usize, usize>,
    averaged_tci: Triple,
    warnings: Vec<WindowWarning>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    config: &'a RunConfig,
    input: InputSummary<'a>,
    /// Lag used by every window, or null when chosen per window.
    selected_lag: Option<usize>,
    lag_selection: &'static str,
    /// Order used by the DY baseline; always the full-sample order.
    dy_lag: Option<usize>,
    windows: usize,
    methods: BTreeMap<String, MethodReport>,
    files: Vec<String>,
}

fn report(
    series: &DynamicSeries,
    averaged: &ConnectednessTable,
    nan_windows: usize,
) -> MethodReport {
    let mut lag_counts = BTreeMap::new();
    for (t, &p) in series.tables.iter().zip(&series.lags) {
        if !t.is_nan() {
            *lag_counts.entry(p).or_insert(0) += 1;
        }
    }
    MethodReport {
        nan_windows,
        lag_counts,
        averaged_tci: averaged.tci,
        warnings: series
            .end_dates
            .iter()
            .zip(&series.warnings)
            .filter(|(_, w)| !w.is_empty())
            .map(|(d, w)| WindowWarning {
                date: d.to_string(),
                messages: w.clone(),
            })
            .collect(),
    }
}

/// Runs the whole pipeline and writes the artifacts into the output
/// directory. Nothing is written unless every stage succeeds.
pub fn run(config: &RunConfig) -> Result<Outcome, RunError> {
    let (artifacts, mut outcome) = compute(config)?;
    write_outputs(&config.output_dir, &artifacts)?;
    outcome.files = artifacts.into_iter().map(|a| a.name).collect();
    Ok(outcome)
}

/// Everything [`run`] does except touching the output directory.
pub fn compute(config: &RunConfig) -> Result<(Vec<Artifact>, Outcome), RunError> {
    let prices = panel::load_csv(&config.input_path, &config.load_options())
        .map_err(|e| RunError::from_core(Stage::Load, e))?;
    let filled =
        panel::forward_fill(&prices).map_err(|e| RunError::from_core(Stage::Returns, e))?;
    let returns =
        panel::log_returns(&filled).map_err(|e| RunError::from_core(Stage::Returns, e))?;
    let names = returns.names().to_vec();
    let k = names.len();

    let required = panel::min_window_length(k, config.lag.max_lag());
    if config.window_length < required {
        return Err(RunError::input(
            Stage::Config,
            format!(
                "window length {} is below the minimum {required} for {k} series and lag order {}",
                config.window_length,
                config.lag.max_lag()
            ),
        ));
    }
    if config.window_length > returns.n_rows() {
        return Err(RunError::input(
            Stage::Config,
            format!(
                "window length {} exceeds the {} available return rows",
                config.window_length,
                returns.n_rows()
            ),
        ));
    }

    let moments = returns
        .values()
        .column_iter()
        .zip(&names)
        .map(|(c, name)| {
            let v: Vec<f64> = c.iter().copied().collect();
            stats::moments(&v)
                .map_err(|e| RunError::from_core(Stage::Stats, format_series(name, e)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let correlations = stats::correlation_matrix(returns.values().as_view(), config.correlation)
        .map_err(|e| RunError::from_core(Stage::Correlations, e))?;

    let per_window = matches!(
        config.lag,
        LagSelection::Auto {
            per_window: true,
            ..
        }
    );
    let full_sample_lag = match config.lag {
        LagSelection::Fixed(p) => p,
        other => resolve_lag(&returns, other).map_err(|e| RunError::from_core(Stage::R2, e))?,
    };

    let r2 = if config.runs(Method::R2) {
        let rolling = RollingConfig {
            window: config.window_length,
            lag: if per_window {
                config.lag
            } else {
                LagSelection::Fixed(full_sample_lag)
            },
            kind: config.correlation,
            percent: config.scale_percent,
        };
        Some(
            connectedness::rolling(&returns, &rolling)
                .map_err(|e| RunError::from_core(Stage::R2, e))?,
        )
    } else {
        None
    };
    let dy = if config.runs(Method::Dy) {
        Some(
            dybench::rolling_dy(
                &returns,
                config.window_length,
                full_sample_lag,
                config.dy_horizon,
                config.scale_percent,
            )
            .map_err(|e| RunError::from_core(Stage::Dy, e))?,
        )
    } else {
        None
    };

    let average = |s: &Option<DynamicSeries>| -> Result<_, RunError> {
        s.as_ref()
            .map(|s| export::export_averaged(s).map_err(|m| RunError::internal(Stage::Export, m)))
            .transpose()
    };
    let r2_avg = average(&r2)?;
    let dy_avg = average(&dy)?;

    let any = r2
        .as_ref()
        .or(dy.as_ref())
        .expect("at least one method runs");
    let dates: Vec<String> = any.end_dates.iter().map(|d| d.to_string()).collect();
    let windows = dates.len();

    let mut out = Vec::new();
    let csv = config.wants(Format::Csv);
    let json = config.wants(Format::Json);
    let kind = config.correlation.as_str();
    if csv {
        out.push(Artifact::new(
            "summary_stats.csv",
            export::summary_csv(&names, &moments),
        ));
        out.push(Artifact::new(
            format!("correlations_{kind}.csv"),
            export::correlations_csv(&names, &correlations),
        ));
    }
    if json {
        out.push(Artifact::new(
            "summary_stats.json",
            export::summary_json(&names, &moments),
        ));
        out.push(Artifact::new(
            format!("correlations_{kind}.json"),
            export::correlations_json(&names, &correlations),
        ));
    }
    for (suffix, series, avg) in [("", &r2, &r2_avg), ("_dy", &dy, &dy_avg)] {
        let (Some(series), Some(avg)) = (series, avg) else {
            continue;
        };
        if csv {
            out.push(Artifact::new(
                format!("averaged_connectedness{suffix}.csv"),
                export::averaged_csv(&avg.table),
            ));
            let measures: [(&str, Measure); 3] = [
                ("to", |t| &t.to),
                ("from", |t| &t.from),
                ("net", |t| &t.net),
            ];
            for (label, f) in measures {
                out.push(Artifact::new(
                    format!("dynamic_{label}{suffix}.csv"),
                    export::dynamic_measure_csv(&dates, series, f),
                ));
            }
            out.push(Artifact::new(
                format!("dynamic_npdc{suffix}.csv"),
                export::dynamic_npdc_csv(&dates, series),
            ));
        }
        if json {
            out.push(Artifact::new(
                format!("averaged_connectedness{suffix}.json"),
                json_bytes(&avg.table),
            ));
            let label = if suffix.is_empty() { "r2" } else { "dy" };
            out.push(Artifact::new(
                format!("dynamic_{label}.json"),
                json_bytes(series),
            ));
        }
    }
    if csv {
        out.push(Artifact::new(
            "dynamic_tci.csv",
            export::dynamic_tci_csv(&dates, r2.as_ref(), dy.as_ref()),
        ));
    }

    // The network export follows the R² table; the DY baseline only has an
    // overall component.
    let network_source = r2_avg.as_ref().or(dy_avg.as_ref()).map(|a| &a.table);
    if let Some(table) = network_source.filter(|_| json || config.wants(Format::Dot)) {
        let components: &[Component] = if table.split_applicable {
            &Component::ALL
        } else {
            &[Component::Overall]
        };
        for &c in components {
            let net = export::export_network(table, c, config.edge_threshold);
            if config.wants(Format::Dot) {
                out.push(Artifact::new(
                    format!("network_{}.dot", c.as_str()),
                    export::network_dot(&net),
                ));
            }
            if json {
                out.push(Artifact::new(
                    format!("network_{}.json", c.as_str()),
                    json_bytes(&net),
                ));
            }
        }
    }

    let mut methods = BTreeMap::new();
    if let (Some(s), Some(a)) = (&r2, &r2_avg) {
        methods.insert("r2".to_string(), report(s, &a.table, a.nan_windows));
    }
    if let (Some(s), Some(a)) = (&dy, &dy_avg) {
        methods.insert("dy".to_string(), report(s, &a.table, a.nan_windows));
    }
    let mut files: Vec<String> = out.iter().map(|a| a.name.clone()).collect();
    files.push("run_manifest.json".into());
    let absent_cells = prices.mask().iter().filter(|&&m| !m).count();
    let manifest = Manifest {
        tool: "spillover",
        version: env!("CARGO_PKG_VERSION"),
        library_version: spillover_core::VERSION,
        config,
        input: InputSummary {
            path: &config.input_path,
            price_rows: prices.n_rows(),
            series: &names,
            absent_cells,
            leading_rows_dropped: prices.n_rows() - filled.n_rows(),
            return_rows: returns.n_rows(),
            first_return_date: returns.dates()[0].to_string(),
            last_return_date: returns.dates()[returns.n_rows() - 1].to_string(),
        },
        selected_lag: (!per_window).then_some(full_sample_lag),
        lag_selection: match config.lag {
            LagSelection::Fixed(_) => "fixed",
            LagSelection::Auto {
                per_window: false, ..
            } => "bic (full sample)",
            LagSelection::Auto {
                per_window: true, ..
            } => "bic (per window)",
        },
        dy_lag: dy.as_ref().map(|_| full_sample_lag),
        windows,
        methods,
        files,
    };
    out.push(Artifact::new("run_manifest.json", json_bytes(&manifest)));

    let outcome = Outcome {
        output_dir: config.output_dir.clone(),
        files: Vec::new(),
        windows,
        lag: manifest.selected_lag,
        r2_tci: r2_avg.as_ref().map(|a| a.table.tci.overall),
        dy_tci: dy_avg.as_ref().map(|a| a.table.tci.overall),
    };
    Ok((out, outcome))
}

fn format_series(name: &str, e: spillover_core::Error) -> spillover_core::Error {
    match e {
        spillover_core::Error::Degenerate(_) => {
            spillover_core::Error::Degenerate(format!("series '{name}'"))
        }
        other => other,
    }
}

/// Writes every artifact to a staging directory inside `dir`, then moves
/// them into place. On failure nothing new is left behind.
pub fn write_outputs(dir: &Path, artifacts: &[Artifact]) -> Result<(), RunError> {
    let fail = |what: &str, path: &Path, e: std::io::Error| {
        RunError::input(
            Stage::Write,
            format!("cannot {what} {}: {e}", path.display()),
        )
    };
    let created = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| fail("create", dir, e))?;
    let cleanup_dir = || {
        if created {
            let _ = fs::remove_dir_all(dir);
        }
    };
    let staging = match tempfile::Builder::new()
        .prefix(".spillover-staging-")
        .tempdir_in(dir)
    {
        Ok(s) => s,
        Err(e) => {
            cleanup_dir();
            return Err(fail("stage outputs in", dir, e));
        }
    };
    for a in artifacts {
        let path = staging.path().join(&a.name);
        if let Err(e) = fs::write(&path, &a.bytes) {
            drop(staging);
            cleanup_dir();
            return Err(fail("write", &path, e));
        }
    }
    let mut moved = Vec::new();
    for a in artifacts {
        let target = dir.join(&a.name);
        if let Err(e) = fs::rename(staging.path().join(&a.name), &target) {
            for m in &moved {
                let _ = fs::remove_file(m);
            }
            drop(staging);
            cleanup_dir();
            return Err(fail("move output to", &target, e));
        }
        moved.push(target);
    }
    Ok(())
}
