use std::fmt;

use thiserror::Error;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Returns,
    Stats,
    Correlations,
    R2,
    Dy,
    Export,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Returns => "returns",
            Stage::Stats => "summary statistics",
            Stage::Correlations => "correlations",
            Stage::R2 => "r2 connectedness",
            Stage::Dy => "dy connectedness",
            Stage::Export => "export",
            Stage::Write => "write",
        })
    }
}

/// Bad input data or configuration versus a failure of the tool itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Internal,
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct RunError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl RunError {
    pub fn input(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            kind: ErrorKind::Input,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            kind: ErrorKind::Internal,
            message: message.to_string(),
        }
    }

    /// Classifies a core error: anything that traces back to the data or
    /// the requested configuration is an input error.
    pub fn from_core(stage: Stage, e: spillover_core::Error) -> Self {
        use spillover_core::Error as E;
        let input = matches!(
            e,
            E::Io(_)
                | E::Csv(_)
                | E::EmptyInput
                | E::TooFewSeries(_)
                | E::DuplicateName(_)
                | E::EmptyName(_)
                | E::BadDate { .. }
                | E::DuplicateDate(_)
                | E::NonPositivePrice { .. }
                | E::EmptySeries(_)
                | E::MissingValue { .. }
                | E::WindowLength { .. }
                | E::InsufficientRows { .. }
                | E::InvalidInput(_)
                | E::Degenerate(_)
        ) || matches!(stage, Stage::Config | Stage::Load | Stage::Returns);
        let kind = if input {
            ErrorKind::Input
        } else {
            ErrorKind::Internal
        };
        Self {
            stage,
            kind,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Internal => 1,
        }
    }
}
