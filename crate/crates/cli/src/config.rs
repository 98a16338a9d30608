//! Run configuration from command-line flags and an optional TOML file.
//!
//! Every flag has a file counterpart with the same name in snake case
//! (`--max-lag` becomes `max_lag`). Flags win over the file. Relative paths
//! in the file are resolved against the file's directory.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spillover_core::dybench::DEFAULT_HORIZON;
use spillover_core::panel::LoadOptions;
use spillover_core::{CorrelationKind, LagSelection};

use crate::error::{RunError, Stage};

pub const DEFAULT_WINDOW: usize = 200;
pub const DEFAULT_MAX_LAG: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "spillover",
    version,
    about = "Contemporaneous and lagged connectedness of return panels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate rolling connectedness and write all tables.
    Run(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with default settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Price CSV: a date column followed by one column per series.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rolling window length in return observations.
    #[arg(long)]
    pub window: Option<usize>,
    /// Lag order, or "auto" for BIC selection.
    #[arg(long)]
    pub lag: Option<LagArg>,
    /// Largest order considered by "auto".
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// With "auto", select the order in every window instead of once.
    #[arg(long)]
    pub per_window_lag: bool,
    /// Correlation estimator.
    #[arg(long, value_parser = parse_kind)]
    pub corr: Option<CorrelationKind>,
    /// Methods to run.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<Method>>,
    /// Forecast horizon of the DY baseline.
    #[arg(long)]
    pub dy_horizon: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats.
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
    /// chrono format of the date column.
    #[arg(long)]
    pub date_format: Option<String>,
    /// Cell values treated as missing.
    #[arg(long, value_delimiter = ',')]
    pub sentinels: Option<Vec<String>>,
    /// Report shares in [0, 1] instead of percent.
    #[arg(long)]
    pub no_percent: bool,
    /// Drop network edges lighter than this.
    #[arg(long)]
    pub edge_threshold: Option<f64>,
}

fn parse_kind(s: &str) -> Result<CorrelationKind, String> {
    s.parse().map_err(|e: spillover_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagArg {
    Fixed(usize),
    Auto,
}

impl FromStr for LagArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LagArg::Auto);
        }
        s.parse()
            .map(LagArg::Fixed)
            .map_err(|_| format!("lag must be a positive integer or \"auto\", got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    R2,
    Dy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dot,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::R2 => "r2",
            Method::Dy => "dy",
        })
    }
}

/// A list given either as a TOML array or as one comma-separated string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum List {
    Joined(String),
    Items(Vec<String>),
}

impl List {
    fn items(self) -> Vec<String> {
        match self {
            List::Joined(s) => s.split(',').map(|x| x.trim().to_string()).collect(),
            List::Items(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LagValue {
    Order(usize),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    window: Option<usize>,
    lag: Option<LagValue>,
    max_lag: Option<usize>,
    per_window_lag: Option<bool>,
    corr: Option<String>,
    method: Option<List>,
    dy_horizon: Option<usize>,
    out: Option<PathBuf>,
    formats: Option<List>,
    date_format: Option<String>,
    sentinels: Option<List>,
    percent: Option<bool>,
    edge_threshold: Option<f64>,
}

/// Fully resolved settings of one run; recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub date_format: String,
    pub sentinels: Vec<String>,
    pub window_length: usize,
    pub lag: LagSelection,
    pub correlation: CorrelationKind,
    pub methods: BTreeSet<Method>,
    pub dy_horizon: usize,
    pub scale_percent: bool,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<Format>,
    pub edge_threshold: f64,
}

impl RunConfig {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            date_format: self.date_format.clone(),
            sentinels: self.sentinels.clone(),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn runs(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    /// Merges `args` over the config file named in `args.config`, if any.
    pub fn resolve(args: &RunArgs) -> Result<Self, RunError> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    RunError::input(
                        Stage::Config,
                        format!("cannot read {}: {e}", path.display()),
                    )
                })?;
                let file: FileConfig = toml::from_str(&text).map_err(|e| {
                    RunError::input(Stage::Config, format!("{}: {e}", path.display()))
                })?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let bad = |m: String| RunError::input(Stage::Config, m);
        let rebase = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };

        let input_path = args
            .input
            .clone()
            .or_else(|| file.input.map(rebase))
            .ok_or_else(|| bad("no input file given (--input)".into()))?;
        let output_dir = args
            .out
            .clone()
            .or_else(|| file.out.map(rebase))
            .ok_or_else(|| bad("no output directory given (--out)".into()))?;

        let lag = match args.lag {
            Some(l) => l,
            None => match file.lag {
                None => LagArg::Auto,
                Some(LagValue::Order(p)) => LagArg::Fixed(p),
                Some(LagValue::Text(s)) => s.parse().map_err(bad)?,
            },
        };
        let p_max = args.max_lag.or(file.max_lag).unwrap_or(DEFAULT_MAX_LAG);
        let per_window = args.per_window_lag || file.per_window_lag.unwrap_or(false);
        let lag = match lag {
            LagArg::Fixed(0) => return Err(bad("lag order must be at least 1".into())),
            LagArg::Fixed(p) => LagSelection::Fixed(p),
            LagArg::Auto if p_max == 0 => return Err(bad("max-lag must be at least 1".into())),
            LagArg::Auto => LagSelection::Auto { p_max, per_window },
        };

        let correlation = match (args.corr, file.corr) {
            (Some(k), _) => k,
            (None, Some(s)) => s
                .parse()
                .map_err(|e: spillover_core::Error| bad(e.to_string()))?,
            (None, None) => CorrelationKind::default(),
        };

        let methods: BTreeSet<Method> = match (&args.method, file.method) {
            (Some(m), _) => m.iter().copied().collect(),
            (None, Some(l)) => parse_values(l.items(), "method")?,
            (None, None) => [Method::R2].into(),
        };
        let formats: BTreeSet<Format> = match (&args.formats, file.formats) {
            (Some(f), _) => f.iter().copied().collect(),
            (None, Some(l)) => parse_values(l.items(), "format")?,
            (None, None) => [Format::Csv, Format::Json].into(),
        };
        if methods.is_empty() {
            return Err(bad("at least one method is required".into()));
        }
        if formats.is_empty() {
            return Err(bad("at least one output format is required".into()));
        }

        let window_length = args.window.or(file.window).unwrap_or(DEFAULT_WINDOW);
        if window_length == 0 {
            return Err(bad("window length must be positive".into()));
        }
        let dy_horizon = args
            .dy_horizon
            .or(file.dy_horizon)
            .unwrap_or(DEFAULT_HORIZON);
        if dy_horizon == 0 {
            return Err(bad("dy-horizon must be at least 1".into()));
        }
        let edge_threshold = args.edge_threshold.or(file.edge_threshold).unwrap_or(0.0);
        if !edge_threshold.is_finite() || edge_threshold < 0.0 {
            return Err(bad(format!(
                "edge threshold must be a non-negative number, got {edge_threshold}"
            )));
        }

        let defaults = LoadOptions::default();
        Ok(RunConfig {
            input_path,
            date_format: args
                .date_format
                .clone()
                .or(file.date_format)
                .unwrap_or(defaults.date_format),
            sentinels: args
                .sentinels
                .clone()
                .or_else(|| file.sentinels.map(List::items))
                .unwrap_or(defaults.sentinels),
            window_length,
            lag,
            correlation,
            methods,
            dy_horizon,
            scale_percent: !args.no_percent && file.percent.unwrap_or(true),
            output_dir,
            formats,
            edge_threshold,
        })
    }
}

fn parse_values<T: ValueEnum + Ord>(
    items: Vec<String>,
    what: &str,
) -> Result<BTreeSet<T>, RunError> {
    items
        .iter()
        .map(|s| {
            T::from_str(s, true)
                .map_err(|_| RunError::input(Stage::Config, format!("unknown {what} '{s}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> RunArgs {
        let mut full = vec!["spillover", "run"];
        full.extend_from_slice(argv);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Run(a) => a,
        }
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&parse(&["--input", "p.csv", "--out", "o"])).unwrap();
        assert_eq!(c.window_length, 200);
        assert_eq!(
            c.lag,
            LagSelection::Auto {
                p_max: 5,
                per_window: false
            }
        );
        assert_eq!(c.correlation, CorrelationKind::Pearson);
        assert_eq!(c.methods, [Method::R2].into());
        assert_eq!(c.formats, [Format::Csv, Format::Json].into());
        assert_eq!(c.dy_horizon, 10);
        assert!(c.scale_percent);
        assert_eq!(c.date_format, "%Y-%m-%d");
    }

    #[test]
    fn full_flag_surface() {
        let c = RunConfig::resolve(&parse(&[
            "--input",
            "p.csv",
            "--window",
            "150",
            "--lag",
            "2",
            "--corr",
            "kendall",
            "--method",
            "r2,dy",
            "--dy-horizon",
            "12",
            "--out",
            "o",
            "--formats",
            "csv,json,dot",
            "--date-format",
            "%d/%m/%Y",
            "--no-percent",
        ]))
        .unwrap();
        assert_eq!(c.window_length, 150);
        assert_eq!(c.lag, LagSelection::Fixed(2));
        assert_eq!(c.correlation, CorrelationKind::Kendall);
        assert_eq!(c.methods, [Method::R2, Method::Dy].into());
        assert_eq!(c.formats.len(), 3);
        assert_eq!(c.dy_horizon, 12);
        assert!(!c.scale_percent);
        assert_eq!(c.date_format, "%d/%m/%Y");
    }

    #[test]
    fn invalid_values_rejected() {
        let base = ["--input", "p.csv", "--out", "o"];
        for extra in [
            ["--lag", "0"],
            ["--window", "0"],
            ["--dy-horizon", "0"],
            ["--max-lag", "0"],
        ] {
            let mut argv = base.to_vec();
            argv.extend_from_slice(&extra);
            let e = RunConfig::resolve(&parse(&argv)).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{extra:?}");
        }
        assert!(Cli::try_parse_from(["spillover", "run", "--corr", "cosine"]).is_err());
        assert!(Cli::try_parse_from(["spillover", "run", "--lag", "two"]).is_err());
        assert!(RunConfig::resolve(&parse(&["--out", "o"])).is_err());
    }

    #[test]
    fn file_values_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "input = \"prices.csv\"\nout = \"/tmp/x\"\nwindow = 120\nlag = \"auto\"\nmax_lag = 3\n\
             corr = \"spearman\"\nmethod = \"r2,dy\"\nformats = [\"csv\", \"dot\"]\npercent = false\n",
        )
        .unwrap();
        let cfg = path.to_str().unwrap();
        let c = RunConfig::resolve(&parse(&["--config", cfg])).unwrap();
        assert_eq!(c.input_path, dir.path().join("prices.csv"));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.window_length, 120);
        assert_eq!(
            c.lag,
            LagSelection::Auto {
                p_max: 3,
                per_window: false
            }
        );
        assert_eq!(c.correlation, CorrelationKind::Spearman);
        assert_eq!(c.methods.len(), 2);
        assert_eq!(c.formats, [Format::Csv, Format::Dot].into());
        assert!(!c.scale_percent);

        let c = RunConfig::resolve(&parse(&[
            "--config", cfg, "--window", "90", "--lag", "1", "--corr", "kendall",
        ]))
        .unwrap();
        assert_eq!(c.window_length, 90);
        assert_eq!(c.lag, LagSelection::Fixed(1));
        assert_eq!(c.correlation, CorrelationKind::Kendall);
    }

    #[test]
    fn unknown_file_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "windw = 3\n").unwrap();
        let e = RunConfig::resolve(&parse(&["--config", path.to_str().unwrap()])).unwrap_err();
        assert_eq!(e.stage, Stage::Config);
        assert_eq!(e.exit_code(), 2);
    }
}
