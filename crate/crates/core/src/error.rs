use std::path::PathBuf;

use crate::panel::{PlayerId, Population, Season};

/// A single problem found while validating panel records.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordIssue {
    DuplicateRecord { player: PlayerId, season: Season },
    InvariantViolation { player: PlayerId, season: Season, field: &'static str, value: String },
}

impl std::fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordIssue::DuplicateRecord { player, season } => {
                write!(f, "duplicate record for ({player}, {season})")
            }
            RecordIssue::InvariantViolation { player, season, field, value } => {
                write!(f, "({player}, {season}): {field} = {value} violates its invariant")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{} invalid record(s): {}", .0.len(), .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidRecords(Vec<RecordIssue>),

    #[error("invariant violated: {field} = {value}")]
    InvariantViolation { field: String, value: String },

    #[error("{}: schema error at line {line}, column {column}: {message}", .path.display())]
    Schema { path: PathBuf, line: u64, column: String, message: String },

    #[error("{population} series has no value for {season}")]
    MissingSeason { population: String, season: Season },

    #[error("no {season} shift rate for player {0}", season = Season::SHIFT_RATING)]
    MissingShiftRate(PlayerId),

    #[error("donor pool for {0} is empty")]
    EmptyDonorPool(PlayerId),

    #[error("player {player} has no value for covariate {label}")]
    MissingCovariate { player: PlayerId, label: String },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("pre-intervention MSPE {0:e} is too small for a stable ratio")]
    DegeneratePreFit(f64),

    #[error("regression design is degenerate: {0}")]
    DegenerateDesign(String),

    #[error("mismatched series: {0}")]
    SeriesMismatch(String),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn missing_season(population: Population, season: Season) -> Self {
        Error::MissingSeason { population: population.to_string(), season }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
