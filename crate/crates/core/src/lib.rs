//! Panel data, difference-in-differences and synthetic control estimators
//! for a league-wide rule change, with placebo-based inference.

pub mod did;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod panel;
pub mod scm;

pub use error::{Error, RecordIssue, Result};
pub use panel::{
    Cohort, CohortBounds, EffectEstimate, EffectKind, EffectUnit, LeagueSplitSeries, Outcome, PanelDataset, PlayerId,
    PlayerSeason, Population, Season, SeasonSet, ShiftCohort, Stat,
};
