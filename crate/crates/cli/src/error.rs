use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] panelcause_core::Error),

    #[error("{}: {message}", .path.display())]
    Config { path: PathBuf, message: String },

    #[error("figure {0} needs an analysis that was not run")]
    AnalysisNotRun(String),

    #[error("unknown analysis `{0}`")]
    UnknownAnalysis(String),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use panelcause_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidRecords(_) => "invalid_records",
                E::InvariantViolation { .. } => "invariant_violation",
                E::Schema { .. } => "schema",
                E::MissingSeason { .. } => "missing_season",
                E::MissingShiftRate(_) => "missing_shift_rate",
                E::EmptyDonorPool(_) => "empty_donor_pool",
                E::MissingCovariate { .. } => "missing_covariate",
                E::SolverFailure(_) => "solver_failure",
                E::DegeneratePreFit(_) => "degenerate_pre_fit",
                E::DegenerateDesign(_) => "degenerate_design",
                E::SeriesMismatch(_) => "series_mismatch",
                E::Io { .. } => "io",
                E::Csv(_) => "csv",
            },
            CliError::Config { .. } => "config",
            CliError::AnalysisNotRun(_) => "analysis_not_run",
            CliError::UnknownAnalysis(_) => "unknown_analysis",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    /// File the error concerns, when there is one.
    pub fn path(&self) -> Option<String> {
        let path = match self {
            CliError::Core(panelcause_core::Error::Io { path, .. })
            | CliError::Core(panelcause_core::Error::Schema { path, .. })
            | CliError::Config { path, .. }
            | CliError::Io { path, .. } => path,
            _ => return None,
        };
        Some(path.display().to_string())
    }
}

/// One entry of the machine-readable error list.
#[derive(Debug, Serialize)]
pub struct ErrorEntry {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl From<&CliError> for ErrorEntry {
    fn from(e: &CliError) -> Self {
        Self { kind: e.kind(), message: e.to_string(), path: e.path() }
    }
}

/// `{"status":"error","errors":[...]}`
pub fn error_report(errors: &[CliError]) -> String {
    let entries: Vec<ErrorEntry> = errors.iter().map(Into::into).collect();
    serde_json::json!({ "status": "error", "errors": entries }).to_string()
}

pub type CliResult<T> = std::result::Result<T, CliError>;
