//! Price panel ingestion, missing-value repair, log returns and rolling windows.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Options controlling how a price CSV is read.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// `chrono` format string for the first column.
    pub date_format: String,
    /// Cell contents (after trimming) that mark an observation as absent.
    pub sentinels: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            date_format: "%Y-%m-%d".to_string(),
            sentinels: vec![String::new(), "NA".to_string(), "NaN".to_string()],
        }
    }
}

/// Date-indexed matrix of prices with a presence mask.
///
/// Absent cells hold `NaN` in `values` and `false` in `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl PricePanel {
    /// Builds a panel from rows of optional prices, sorting rows by date.
    pub fn from_rows(
        names: Vec<String>,
        mut rows: Vec<(NaiveDate, Vec<Option<f64>>)>,
    ) -> Result<Self> {
        validate_names(&names)?;
        let k = names.len();
        rows.sort_by_key(|(d, _)| *d);
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateDate(pair[0].0.to_string()));
            }
        }
        let t = rows.len();
        let mut values = DMatrix::from_element(t, k, f64::NAN);
        let mut mask = DMatrix::from_element(t, k, false);
        for (r, (date, cells)) in rows.iter().enumerate() {
            if cells.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: cells.len(),
                });
            }
            for (c, cell) in cells.iter().enumerate() {
                if let Some(v) = *cell {
                    if !v.is_finite() || v <= 0.0 {
                        return Err(Error::NonPositivePrice {
                            row: r,
                            date: date.to_string(),
                            column: names[c].clone(),
                            value: v,
                        });
                    }
                    values[(r, c)] = v;
                    mask[(r, c)] = true;
                }
            }
        }
        Ok(Self {
            dates: rows.into_iter().map(|(d, _)| d).collect(),
            names,
            values,
            mask,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn is_present(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    /// Price at `(row, col)`, or `None` when absent.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[(row, col)].then(|| self.values[(row, col)])
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }
}

fn validate_names(names: &[String]) -> Result<()> {
    if names.len() < 2 {
        return Err(Error::TooFewSeries(names.len()));
    }
    let mut seen = HashSet::new();
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() {
            return Err(Error::EmptyName(i + 1));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

/// Reads a `date,<name1>,...,<nameK>` CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<PricePanel> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, options)
}

/// Same as [`load_csv`] for any reader.
///
/// Cells that are empty, match a sentinel, or fail to parse as a number are
/// marked absent. Non-positive numbers are rejected.
pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyInput),
    };
    if header.len() < 3 {
        return Err(Error::TooFewSeries(header.len().saturating_sub(1)));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    validate_names(&names)?;

    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        let raw_date = rec.get(0).unwrap_or_default();
        let date = NaiveDate::parse_from_str(raw_date, &options.date_format).map_err(|_| {
            Error::BadDate {
                line,
                value: raw_date.to_string(),
            }
        })?;
        let cells = rec
            .iter()
            .skip(1)
            .map(|cell| {
                if options.sentinels.iter().any(|s| s == cell) {
                    None
                } else {
                    cell.parse::<f64>().ok().filter(|v| !v.is_nan())
                }
            })
            .collect();
        rows.push((date, cells));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    PricePanel::from_rows(names, rows)
}

/// Replaces each absent price with the most recent present price of the
/// same series, then drops leading rows until every series has started.
pub fn forward_fill(panel: &PricePanel) -> Result<PricePanel> {
    let (t, k) = panel.values.shape();
    let mut values = panel.values.clone();
    let mut start = 0;
    for c in 0..k {
        let first = (0..t)
            .find(|&r| panel.mask[(r, c)])
            .ok_or_else(|| Error::EmptySeries(panel.names[c].clone()))?;
        start = start.max(first);
        let mut last = values[(first, c)];
        for r in first..t {
            if panel.mask[(r, c)] {
                last = values[(r, c)];
            } else {
                values[(r, c)] = last;
            }
        }
    }
    let rows = t - start;
    Ok(PricePanel {
        dates: panel.dates[start..].to_vec(),
        names: panel.names.clone(),
        values: values.rows(start, rows).into_owned(),
        mask: DMatrix::from_element(rows, k, true),
    })
}

/// Date-indexed matrix of log returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        validate_names(&names)?;
        if values.nrows() != dates.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: values.ncols(),
            });
        }
        if dates.windows(2).any(|d| d[0] >= d[1]) {
            return Err(Error::InvalidInput(
                "return dates must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("returns must be finite".into()));
        }
        Ok(Self {
            dates,
            names,
            values,
        })
    }

    /// Wraps a matrix with synthetic consecutive daily dates starting at
    /// 2000-01-01 and names `s1..sK`. Handy for simulations.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..values.nrows())
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect();
        let names = (1..=values.ncols()).map(|i| format!("s{i}")).collect();
        Self::new(dates, names, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    /// Rows covered by `window`.
    pub fn window(&self, window: &Window) -> DMatrixView<'_, f64> {
        self.values.rows(window.start_index, window.length)
    }
}

/// Computes `ln(p[t+1] / p[t])` for every series.
pub fn log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let (t, k) = panel.values.shape();
    for r in 0..t {
        for c in 0..k {
            if !panel.mask[(r, c)] {
                return Err(Error::MissingValue {
                    row: r,
                    column: panel.names[c].clone(),
                });
            }
        }
    }
    if t < 2 {
        return Err(Error::InsufficientRows {
            rows: t,
            required: 2,
        });
    }
    let values = DMatrix::from_fn(t - 1, k, |r, c| {
        (panel.values[(r + 1, c)] / panel.values[(r, c)]).ln()
    });
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.names.clone(), values)
}

/// A contiguous slice of return rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start_index: usize,
    pub length: usize,
    pub end_date: NaiveDate,
}

/// All windows of `length` rows, stepping by one row.
pub fn windows(returns: &ReturnPanel, length: usize) -> Result<Vec<Window>> {
    let rows = returns.n_rows();
    if length == 0 || length > rows {
        return Err(Error::WindowLength { length, rows });
    }
    Ok((0..=rows - length)
        .map(|start| Window {
            start_index: start,
            length,
            end_date: returns.dates[start + length - 1],
        })
        .collect())
}

/// Smallest window that keeps every regression in the system overdetermined
/// for lag orders up to `p_max`.
pub fn min_window_length(k: usize, p_max: usize) -> usize {
    k * (p_max + 1) + 10
}
