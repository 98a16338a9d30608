//! Averaged tables, network edge lists and the file formats of a run.
//!
//! CSV numbers are written with six decimals and an empty cell for NaN;
//! JSON keeps full precision and writes NaN as `null`.

use serde::{Deserialize, Serialize};
use spillover_core::connectedness::nan_as_null;
use spillover_core::stats::{CorrelationMatrix, MomentSummary};
use spillover_core::{Component, ConnectednessTable, DynamicSeries, Triple};

/// Fixed six-decimal formatting; NaN becomes the empty string.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Significance stars at the 10%, 5% and 1% levels.
pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        _ => "",
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// Element-wise mean over the windows; NaN cells are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Averaged {
    pub table: ConnectednessTable,
    /// Windows whose table is entirely NaN.
    pub nan_windows: usize,
}

/// Averages every measure of `series` across its windows, skipping NaN
/// entries cell by cell.
pub fn export_averaged(series: &DynamicSeries) -> Result<Averaged, String> {
    let valid: Vec<&ConnectednessTable> = series.tables.iter().filter(|t| !t.is_nan()).collect();
    let Some(first) = valid.first() else {
        return Err(format!(
            "all {} windows failed; nothing to average",
            series.len()
        ));
    };
    let k = first.n_series();
    let mean = |get: &dyn Fn(&ConnectednessTable) -> f64| {
        let (sum, n) = valid
            .iter()
            .map(|t| get(t))
            .filter(|v| !v.is_nan())
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    };
    let triple = |get: &dyn Fn(&ConnectednessTable) -> Triple| Triple {
        overall: mean(&|t| get(t).overall),
        contemp: mean(&|t| get(t).contemp),
        lagged: mean(&|t| get(t).lagged),
    };
    let per_series = |get: &dyn Fn(&ConnectednessTable, usize) -> Triple| -> Vec<Triple> {
        (0..k).map(|i| triple(&|t| get(t, i))).collect()
    };
    let table = ConnectednessTable {
        names: first.names.clone(),
        percent: first.percent,
        split_applicable: first.split_applicable,
        pairwise: (0..k)
            .map(|i| (0..k).map(|j| triple(&|t| t.pairwise[i][j])).collect())
            .collect(),
        to: per_series(&|t, i| t.to[i]),
        from: per_series(&|t, i| t.from[i]),
        net: per_series(&|t, i| t.net[i]),
        inc_own: per_series(&|t, i| t.inc_own[i]),
        tci: triple(&|t| t.tci),
        own_lag: (0..k).map(|i| mean(&|t| t.own_lag[i])).collect(),
        mean_r_squared: triple(&|t| t.mean_r_squared),
    };
    Ok(Averaged {
        table,
        nan_windows: series.len() - valid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    /// NET of the node; positive marks a net transmitter.
    #[serde(with = "nan_as_null")]
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    pub component: Component,
}

/// Directed network of net pairwise spillovers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub component: Component,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// One edge `j → i` for every ordered pair with `NPDC[i][j] > 0` in
/// `component`, weighted by that value. Edges lighter than `threshold` are
/// dropped.
pub fn export_network(
    table: &ConnectednessTable,
    component: Component,
    threshold: f64,
) -> EdgeList {
    let npdc = table.npdc();
    let k = table.n_series();
    let nodes = (0..k)
        .map(|i| Node {
            name: table.names[i].clone(),
            net: table.net[i].component(component),
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let w = npdc.values[i][j].component(component);
            if i != j && w > 0.0 && w >= threshold {
                edges.push(Edge {
                    source: table.names[j].clone(),
                    target: table.names[i].clone(),
                    weight: w,
                    component,
                });
            }
        }
    }
    EdgeList {
        component,
        nodes,
        edges,
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering of an edge list. Transmitters are drawn as boxes,
/// receivers as ellipses; `net` and `weight` are kept as attributes.
pub fn network_dot(net: &EdgeList) -> Vec<u8> {
    let mut s = format!("digraph {} {{\n", dot_id(net.component.as_str()));
    for n in &net.nodes {
        let (role, shape) = if n.net > 0.0 {
            ("transmitter", "box")
        } else {
            ("receiver", "ellipse")
        };
        s.push_str(&format!(
            "  {} [net=\"{}\", role=\"{role}\", shape={shape}];\n",
            dot_id(&n.name),
            fmt_num(n.net)
        ));
    }
    for e in &net.edges {
        let w = fmt_num(e.weight);
        s.push_str(&format!(
            "  {} -> {} [weight=\"{w}\", label=\"{w}\"];\n",
            dot_id(&e.source),
            dot_id(&e.target)
        ));
    }
    s.push_str("}\n");
    s.into_bytes()
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    series: &'a str,
    #[serde(flatten)]
    moments: &'a MomentSummary,
    jb_p_value: f64,
}

/// JB p-value: the χ²(2) survival function is `exp(-x / 2)`.
fn jb_p_value(jb: f64) -> f64 {
    (-jb / 2.0).exp()
}

pub fn summary_csv(names: &[String], rows: &[MomentSummary]) -> Vec<u8> {
    let header = [
        "series",
        "n",
        "mean",
        "variance",
        "skewness",
        "excess_kurtosis",
        "jb_statistic",
        "jb_p_value",
        "jb_stars",
    ]
    .map(String::from);
    let body: Vec<Vec<String>> = names
        .iter()
        .zip(rows)
        .map(|(name, m)| {
            let p = jb_p_value(m.jb_statistic);
            vec![
                name.clone(),
                m.n.to_string(),
                fmt_num(m.mean),
                fmt_num(m.variance),
                fmt_num(m.skewness),
                fmt_num(m.excess_kurtosis),
                fmt_num(m.jb_statistic),
                fmt_num(p),
                stars(p).into(),
            ]
        })
        .collect();
    csv_bytes(&header, &body)
}

pub fn summary_json(names: &[String], rows: &[MomentSummary]) -> Vec<u8> {
    let rows: Vec<SummaryRow> = names
        .iter()
        .zip(rows)
        .map(|(series, moments)| SummaryRow {
            series,
            moments,
            jb_p_value: jb_p_value(moments.jb_statistic),
        })
        .collect();
    json_bytes(&rows)
}

/// One row per unordered pair.
pub fn correlations_csv(names: &[String], m: &CorrelationMatrix) -> Vec<u8> {
    let header = ["series_a", "series_b", "coefficient", "p_value", "stars"].map(String::from);
    let k = names.len();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let p = m.pvalues[(i, j)];
            rows.push(vec![
                names[i].clone(),
                names[j].clone(),
                fmt_num(m.values[(i, j)]),
                fmt_num(p),
                stars(p).into(),
            ]);
        }
    }
    csv_bytes(&header, &rows)
}

#[derive(Serialize)]
struct CorrelationJson<'a> {
    kind: &'a str,
    names: &'a [String],
    coefficients: Vec<Vec<f64>>,
    p_values: Vec<Vec<f64>>,
    stars: Vec<Vec<&'static str>>,
}

pub fn correlations_json(names: &[String], m: &CorrelationMatrix) -> Vec<u8> {
    let k = names.len();
    let grid = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..k).map(|i| (0..k).map(|j| f(i, j)).collect()).collect()
    };
    json_bytes(&CorrelationJson {
        kind: m.kind.as_str(),
        names,
        coefficients: grid(&|i, j| m.values[(i, j)]),
        p_values: grid(&|i, j| m.pvalues[(i, j)]),
        stars: (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if i == j { "" } else { stars(m.pvalues[(i, j)]) })
                    .collect()
            })
            .collect(),
    })
}

/// Published-table layout: for every series `i` one row per component with
/// the contributions of each column series to `i` and FROM in the last
/// column; then TO, NET and Inc.Own rows. The diagonal holds own-lag
/// shares. The FROM column of the NET rows carries the TCI. Without a
/// contemporaneous/lagged split only the overall rows are written.
pub fn averaged_csv(t: &ConnectednessTable) -> Vec<u8> {
    let components: &[Component] = if t.split_applicable {
        &Component::ALL
    } else {
        &[Component::Overall]
    };
    let mut header = vec!["row".to_string(), "component".to_string()];
    header.extend(t.names.iter().cloned());
    header.push("FROM".into());
    let mut rows = Vec::new();
    let line = |label: &str, c: Component, cells: Vec<f64>, last: f64| {
        let mut r = vec![label.to_string(), c.as_str().to_string()];
        r.extend(cells.into_iter().map(fmt_num));
        r.push(fmt_num(last));
        r
    };
    for (i, name) in t.names.iter().enumerate() {
        for &c in components {
            let cells = t.pairwise[i].iter().map(|x| x.component(c)).collect();
            rows.push(line(name, c, cells, t.from[i].component(c)));
        }
    }
    for (label, v) in [("TO", &t.to), ("NET", &t.net), ("Inc.Own", &t.inc_own)] {
        for &c in components {
            let last = if label == "NET" {
                t.tci.component(c)
            } else {
                f64::NAN
            };
            rows.push(line(
                label,
                c,
                v.iter().map(|x| x.component(c)).collect(),
                last,
            ));
        }
    }
    csv_bytes(&header, &rows)
}

/// Rows are window end dates; R² columns first, then the DY column.
pub fn dynamic_tci_csv(
    dates: &[String],
    r2: Option<&DynamicSeries>,
    dy: Option<&DynamicSeries>,
) -> Vec<u8> {
    let mut header = vec!["date".to_string()];
    if r2.is_some() {
        header.extend(["r2_overall", "r2_contemp", "r2_lagged"].map(String::from));
    }
    if dy.is_some() {
        header.push("dy_overall".into());
    }
    let rows: Vec<Vec<String>> = dates
        .iter()
        .enumerate()
        .map(|(w, d)| {
            let mut r = vec![d.clone()];
            if let Some(s) = r2 {
                let t = s.tables[w].tci;
                r.extend([t.overall, t.contemp, t.lagged].map(fmt_num));
            }
            if let Some(s) = dy {
                r.push(fmt_num(s.tables[w].tci.overall));
            }
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn components_of(s: &DynamicSeries) -> &'static [Component] {
    let split = s
        .tables
        .iter()
        .find(|t| !t.is_nan())
        .is_none_or(|t| t.split_applicable);
    if split {
        &Component::ALL
    } else {
        &[Component::Overall]
    }
}

/// Per-series measure over time: columns `<series>_<component>`.
pub fn dynamic_measure_csv(
    dates: &[String],
    s: &DynamicSeries,
    measure: fn(&ConnectednessTable) -> &[Triple],
) -> Vec<u8> {
    let comps = components_of(s);
    let mut header = vec!["date".to_string()];
    for n in &s.names {
        header.extend(comps.iter().map(|c| format!("{n}_{}", c.as_str())));
    }
    let rows: Vec<Vec<String>> = dates
        .iter()
        .zip(&s.tables)
        .map(|(d, t)| {
            let mut r = vec![d.clone()];
            for x in measure(t) {
                r.extend(comps.iter().map(|&c| fmt_num(x.component(c))));
            }
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// NPDC over time for every pair `i < j`: column `<i>|<j>_<component>`
/// holds `NPDC[i][j]`, positive when `j` is the net transmitter to `i`.
pub fn dynamic_npdc_csv(dates: &[String], s: &DynamicSeries) -> Vec<u8> {
    let comps = components_of(s);
    let k = s.names.len();
    let mut header = vec!["date".to_string()];
    for i in 0..k {
        for j in i + 1..k {
            header.extend(
                comps
                    .iter()
                    .map(|c| format!("{}|{}_{}", s.names[i], s.names[j], c.as_str())),
            );
        }
    }
    let rows: Vec<Vec<String>> = dates
        .iter()
        .zip(&s.tables)
        .map(|(d, t)| {
            let npdc = t.npdc();
            let mut r = vec![d.clone()];
            for i in 0..k {
                for j in i + 1..k {
                    r.extend(
                        comps
                            .iter()
                            .map(|&c| fmt_num(npdc.values[i][j].component(c))),
                    );
                }
            }
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}
