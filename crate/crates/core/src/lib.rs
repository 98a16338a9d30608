//! Contemporaneous and lagged spillover measurement for multivariate
//! return panels.
//!
//! The pipeline is: [`panel`] loads and repairs prices and serves rolling
//! windows; [`r2core`] decomposes the goodness-of-fit of each series'
//! regression on the other series and on lags of all series;
//! [`connectedness`] turns the decomposition into TO/FROM/NET/NPDC/TCI
//! measures and runs the rolling engine; [`dybench`] provides the
//! generalized-FEVD baseline; [`stats`] holds descriptive statistics and
//! the correlation estimators.

pub mod connectedness;
pub mod dybench;
pub mod error;
pub mod panel;
pub mod r2core;
pub mod simulate;
pub mod stats;
mod varfit;

pub use connectedness::{
    Component, ConnectednessTable, DynamicSeries, LagSelection, NpdcMatrix, RollingConfig, Triple,
};
pub use error::{Error, Result};
pub use panel::{PricePanel, ReturnPanel, Window};
pub use stats::CorrelationKind;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
