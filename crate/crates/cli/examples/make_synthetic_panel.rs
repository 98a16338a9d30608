//! Regenerates `data/synthetic_panel.csv`: 19 series, 773 business days,
//! about 0.5% of cells missing.
//!
//! ```text
//! cargo run -p spillover-cli --example make_synthetic_panel [-- <path>]
//! ```

use std::fmt::Write as _;

use spillover_core::simulate::synthetic_price_panel;

pub const SERIES: usize = 19;
pub const ROWS: usize = 773;
pub const MISSING_RATE: f64 = 0.005;
pub const SEED: u64 = 7;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_panel.csv").into());
    let panel =
        synthetic_price_panel(SERIES, ROWS, MISSING_RATE, SEED).expect("valid generator settings");
    let mut out = String::from("date");
    for n in panel.names() {
        write!(out, ",{n}").unwrap();
    }
    out.push('\n');
    for (r, d) in panel.dates().iter().enumerate() {
        write!(out, "{}", d.format("%Y-%m-%d")).unwrap();
        for c in 0..panel.n_series() {
            match panel.get(r, c) {
                Some(v) => write!(out, ",{v:.4}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(&path, out).expect("writable output path");
    eprintln!("wrote {path}");
}
