use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spillover_cli::export::{export_averaged, json_bytes};
use spillover_core::connectedness::rolling;
use spillover_core::panel::{self, LoadOptions};
use spillover_core::simulate::synthetic_price_panel;
use spillover_core::{ConnectednessTable, LagSelection, RollingConfig};
use tempfile::TempDir;

fn spillover(args: &[&str], envs: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
        .args(args)
        .envs(envs.iter().copied())
        .output()
        .unwrap()
}

/// Four-series, 301-row price panel with a few gaps.
fn small_panel(dir: &Path) -> PathBuf {
    let p = synthetic_price_panel(4, 301, 0.01, 11).unwrap();
    let mut text = String::from("date");
    for n in p.names() {
        text.push(',');
        text.push_str(n);
    }
    text.push('\n');
    for (r, d) in p.dates().iter().enumerate() {
        text.push_str(&d.to_string());
        for c in 0..p.n_series() {
            text.push(',');
            if let Some(v) = p.get(r, c) {
                text.push_str(&format!("{v:.4}"));
            }
        }
        text.push('\n');
    }
    let path = dir.join("prices.csv");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn setup() -> (TempDir, PathBuf, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let input = small_panel(tmp.path());
    let out = tmp.path().join("out");
    (tmp, input, out)
}

#[test]
fn empty_input_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = tmp.path().join("out");
    let o = spillover(&["run", "--input", s(&input), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load stage"));
    assert!(!out.exists());
}

#[test]
fn input_errors_exit_2() {
    let (tmp, input, out) = setup();
    let missing = tmp.path().join("nope.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--input", s(&missing), "--out", s(&out)],
        vec![
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "12",
        ],
        vec![
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "5000",
        ],
        vec![
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--corr",
            "cosine",
        ],
        vec![
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--date-format",
            "%d.%m.%Y",
        ],
    ];
    for args in cases {
        let o = spillover(&args, &[]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.exists(), "{args:?}");
    }
    let o = spillover(
        &["run", "--input", s(&input), "--out", s(&out)],
        &[("SPILLOVER_THREADS", "zero")],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_run_writes_documented_files() {
    let (_tmp, input, out) = setup();
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "100",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = listing(&out);
    for f in [
        "averaged_connectedness.csv",
        "averaged_connectedness.json",
        "correlations_pearson.csv",
        "correlations_pearson.json",
        "dynamic_from.csv",
        "dynamic_net.csv",
        "dynamic_npdc.csv",
        "dynamic_r2.json",
        "dynamic_tci.csv",
        "dynamic_to.csv",
        "network_contemp.json",
        "network_lagged.json",
        "network_overall.json",
        "run_manifest.json",
        "summary_stats.csv",
        "summary_stats.json",
    ] {
        assert!(files.contains(&f.to_string()), "{f} missing from {files:?}");
    }
    assert!(!files
        .iter()
        .any(|f| f.ends_with(".dot") || f.contains("_dy")));

    let tci = fs::read_to_string(out.join("dynamic_tci.csv")).unwrap();
    assert_eq!(
        tci.lines().next(),
        Some("date,r2_overall,r2_contemp,r2_lagged")
    );
    assert_eq!(tci.lines().count(), 1 + 300 - 100 + 1);

    let to = fs::read_to_string(out.join("dynamic_to.csv")).unwrap();
    assert!(to.starts_with("date,S01_overall,S01_contemp,S01_lagged,S02_overall,"));
    let npdc = fs::read_to_string(out.join("dynamic_npdc.csv")).unwrap();
    assert_eq!(npdc.lines().next().unwrap().split(',').count(), 1 + 6 * 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["windows"], 201);
    assert_eq!(manifest["lag_selection"], "bic (full sample)");
    assert!(manifest["selected_lag"].as_u64().unwrap() >= 1);
    assert_eq!(manifest["methods"]["r2"]["nan_windows"], 0);
    assert_eq!(manifest["config"]["correlation"], "pearson");
    assert_eq!(manifest["input"]["price_rows"], 301);
}

#[test]
fn averaged_json_round_trips_bit_exactly() {
    let (_tmp, input, out) = setup();
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "100",
            "--lag",
            "2",
        ],
        &[],
    );
    assert!(o.status.success());
    let text = fs::read(out.join("averaged_connectedness.json")).unwrap();
    let parsed: ConnectednessTable = serde_json::from_slice(&text).unwrap();
    assert_eq!(json_bytes(&parsed), text);

    // Matches the table computed in-process.
    let prices = panel::load_csv(&input, &LoadOptions::default()).unwrap();
    let returns = panel::log_returns(&panel::forward_fill(&prices).unwrap()).unwrap();
    let config = RollingConfig {
        window: 100,
        lag: LagSelection::Fixed(2),
        ..RollingConfig::default()
    };
    let expected = export_averaged(&rolling(&returns, &config).unwrap())
        .unwrap()
        .table;
    assert_eq!(parsed, expected);
}

#[test]
fn both_methods_and_all_formats() {
    let (_tmp, input, out) = setup();
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "100",
            "--lag",
            "1",
            "--method",
            "r2,dy",
            "--formats",
            "csv,json,dot",
            "--corr",
            "kendall",
            "--dy-horizon",
            "5",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = listing(&out);
    for f in [
        "averaged_connectedness_dy.csv",
        "averaged_connectedness_dy.json",
        "correlations_kendall.csv",
        "dynamic_dy.json",
        "dynamic_net_dy.csv",
        "network_overall.dot",
        "network_lagged.dot",
    ] {
        assert!(files.contains(&f.to_string()), "{f} missing");
    }
    let tci = fs::read_to_string(out.join("dynamic_tci.csv")).unwrap();
    assert_eq!(
        tci.lines().next(),
        Some("date,r2_overall,r2_contemp,r2_lagged,dy_overall")
    );
    let net_dy = fs::read_to_string(out.join("dynamic_net_dy.csv")).unwrap();
    assert!(net_dy.starts_with("date,S01_overall,S02_overall,"));
    let corr = fs::read_to_string(out.join("correlations_kendall.csv")).unwrap();
    assert_eq!(
        corr.lines().next(),
        Some("series_a,series_b,coefficient,p_value,stars")
    );
    assert_eq!(corr.lines().count(), 1 + 6);
    let dot = fs::read_to_string(out.join("network_overall.dot")).unwrap();
    assert!(dot.starts_with("digraph \"overall\" {"));
}

#[test]
fn dy_only_run() {
    let (_tmp, input, out) = setup();
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "100",
            "--method",
            "dy",
            "--formats",
            "csv,dot",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = listing(&out);
    assert!(!files.contains(&"averaged_connectedness.csv".to_string()));
    assert!(files.contains(&"averaged_connectedness_dy.csv".to_string()));
    assert!(files.contains(&"network_overall.dot".to_string()));
    assert!(!files.contains(&"network_contemp.dot".to_string()));
    let tci = fs::read_to_string(out.join("dynamic_tci.csv")).unwrap();
    assert_eq!(tci.lines().next(), Some("date,dy_overall"));
    let avg = fs::read_to_string(out.join("averaged_connectedness_dy.csv")).unwrap();
    assert!(avg
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("overall")));
}

#[test]
fn config_file_with_flag_override() {
    let (tmp, input, out) = setup();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "input = \"{}\"\nout = \"out\"\nwindow = 90\nlag = 1\ncorr = \"spearman\"\npercent = false\n",
            input.file_name().unwrap().to_str().unwrap()
        ),
    )
    .unwrap();
    let o = spillover(&["run", "--config", s(&cfg), "--window", "100"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["window_length"], 100);
    assert_eq!(manifest["config"]["correlation"], "spearman");
    assert_eq!(manifest["config"]["scale_percent"], false);
    assert_eq!(manifest["windows"], 201);
    let avg: ConnectednessTable =
        serde_json::from_str(&fs::read_to_string(out.join("averaged_connectedness.json")).unwrap())
            .unwrap();
    assert!(!avg.percent);
    assert!(avg.tci.overall < 1.0);
}

#[test]
fn thread_count_does_not_change_output() {
    let (tmp, input, out) = setup();
    let args = |o: &Path| {
        vec![
            "run".to_string(),
            "--input".into(),
            s(&input).into(),
            "--out".into(),
            s(o).into(),
            "--window".into(),
            "100".into(),
            "--method".into(),
            "r2,dy".into(),
        ]
    };
    let single = tmp.path().join("single");
    let run = |dir: &Path, threads: &str| {
        let a = args(dir);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = spillover(&a, &[("SPILLOVER_THREADS", threads)]);
        assert!(o.status.success());
    };
    run(&single, "1");
    run(&out, "3");
    // The manifest records the output directory, so compare the others.
    for f in listing(&out).iter().filter(|f| *f != "run_manifest.json") {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(single.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn unrelated_files_in_output_dir_survive() {
    let (_tmp, input, out) = setup();
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("notes.txt"), "keep me").unwrap();
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "100",
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(out.join("notes.txt")).unwrap(),
        "keep me"
    );
    assert!(!listing(&out)
        .iter()
        .any(|f| f.starts_with(".spillover-staging")));

    // A failing run leaves the existing directory alone.
    let o = spillover(
        &[
            "run",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--window",
            "3",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("notes.txt").exists());
}

#[test]
fn bundled_panel_matches_generator() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_panel.csv");
    let loaded = panel::load_csv(&path, &LoadOptions::default()).unwrap();
    let generated = synthetic_price_panel(19, 773, 0.005, 7).unwrap();
    assert_eq!(loaded.dates(), generated.dates());
    assert_eq!(loaded.names(), generated.names());
    assert_eq!(loaded.mask(), generated.mask());
    for r in 0..loaded.n_rows() {
        for c in 0..loaded.n_series() {
            if let (Some(a), Some(b)) = (loaded.get(r, c), generated.get(r, c)) {
                assert!((a - b).abs() <= 5e-5 * b.max(1.0), "row {r}, column {c}");
            }
        }
    }
}
