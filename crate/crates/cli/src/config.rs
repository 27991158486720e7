//! Run configuration, read from a TOML file.
//!
//! Every key is optional; defaults reproduce the standard analysis
//! (250 PA gate, 15/30/75% cohort bounds, 2023 intervention).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use panelcause_core::scm::SolverConfig;
use panelcause_core::{CohortBounds, Outcome, PlayerId, Season};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the input CSVs, relative to the config file.
    pub data_dir: PathBuf,
    pub league_file: String,
    pub player_file: String,
    pub shift_file: String,
    /// Player-level outcomes for the synthetic control analyses.
    pub outcomes: Vec<Outcome>,
    /// League-level outcomes for the DID analysis.
    pub did_outcomes: Vec<Outcome>,
    pub intervention_year: Season,
    pub min_pa: u32,
    /// Player shown in the single-player figures and donor table.
    pub featured_player: PlayerId,
    pub cohort_bounds: CohortBounds,
    pub solver: SolverConfig,
    pub analyses: Analyses,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/fixture"),
            league_file: "league_splits.csv".into(),
            player_file: "player_seasons.csv".into(),
            shift_file: "shift_rates.csv".into(),
            outcomes: Outcome::PLAYER.to_vec(),
            did_outcomes: Outcome::ALL.to_vec(),
            intervention_year: Season::BAN,
            min_pa: 250,
            featured_player: PlayerId::new("corey-seager"),
            cohort_bounds: CohortBounds::default(),
            solver: SolverConfig::default(),
            analyses: Analyses::default(),
        }
    }
}

/// Which analyses a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analyses {
    pub did: bool,
    pub scm: bool,
    pub placebos: bool,
    pub in_unit: bool,
    pub in_time: bool,
    pub extension_2024: bool,
    /// Extension re-run gating on 2024 playing time only.
    pub extension_only_2024: bool,
    pub dose_response: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Self {
            did: true,
            scm: true,
            placebos: true,
            in_unit: true,
            in_time: true,
            extension_2024: true,
            extension_only_2024: false,
            dose_response: true,
        }
    }
}

pub const ANALYSIS_NAMES: [&str; 8] =
    ["did", "scm", "placebos", "in_unit", "in_time", "extension_2024", "extension_only_2024", "dose_response"];

impl Analyses {
    pub fn none() -> Self {
        Self {
            did: false,
            scm: false,
            placebos: false,
            in_unit: false,
            in_time: false,
            extension_2024: false,
            extension_only_2024: false,
            dose_response: false,
        }
    }

    /// Parse a comma-separated list such as `did,scm,placebos`.
    pub fn parse_list(list: &str) -> CliResult<Self> {
        let mut a = Self::none();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            *a.flag_mut(name).ok_or_else(|| CliError::UnknownAnalysis(name.to_string()))? = true;
        }
        Ok(a)
    }

    fn flag_mut(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "did" => &mut self.did,
            "scm" => &mut self.scm,
            "placebos" => &mut self.placebos,
            "in_unit" => &mut self.in_unit,
            "in_time" => &mut self.in_time,
            "extension_2024" => &mut self.extension_2024,
            "extension_only_2024" => &mut self.extension_only_2024,
            "dose_response" => &mut self.dose_response,
            _ => return None,
        })
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        let mut copy = *self;
        ANALYSIS_NAMES.into_iter().filter(|n| *copy.flag_mut(n).unwrap()).collect()
    }

    /// Any analysis needing player data.
    pub fn needs_players(&self) -> bool {
        self.scm
            || self.placebos
            || self.in_unit
            || self.in_time
            || self.extension_2024
            || self.extension_only_2024
            || self.dose_response
    }
}

impl RunConfig {
    /// Read and validate a config file. `data_dir` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::parse(&text, path)?;
        if config.data_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            config.data_dir = base.join(&config.data_dir);
        }
        Ok(config)
    }

    pub fn parse(text: &str, source: &Path) -> CliResult<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| CliError::Config { path: source.to_path_buf(), message: e.to_string() })?;
        config.validate(source)?;
        Ok(config)
    }

    pub fn validate(&self, source: &Path) -> CliResult<()> {
        let bad = |message: String| Err(CliError::Config { path: source.to_path_buf(), message });
        self.cohort_bounds.validate()?;
        self.solver.validate()?;
        if self.outcomes.is_empty() && self.analyses.needs_players() {
            return bad("outcomes is empty".into());
        }
        for o in &self.outcomes {
            if !Outcome::PLAYER.contains(o) {
                return bad(format!("outcome {o} is not available at player level"));
            }
        }
        for list in [&self.outcomes, &self.did_outcomes] {
            if list.iter().collect::<BTreeSet<_>>().len() != list.len() {
                return bad("outcome lists may not repeat an outcome".into());
            }
        }
        let year = self.intervention_year.year();
        if !(2022..=2024).contains(&year) {
            return bad(format!("intervention_year {year} must be 2022, 2023 or 2024"));
        }
        if self.min_pa == 0 {
            return bad("min_pa must be positive".into());
        }
        Ok(())
    }

    pub fn league_path(&self) -> PathBuf {
        self.data_dir.join(&self.league_file)
    }

    pub fn player_path(&self) -> PathBuf {
        self.data_dir.join(&self.player_file)
    }

    pub fn shift_path(&self) -> PathBuf {
        self.data_dir.join(&self.shift_file)
    }

    /// Canonical form hashed into every report. The data directory is
    /// omitted so the hash does not depend on where the run happens.
    pub fn canonical(&self) -> String {
        let mut copy = self.clone();
        copy.data_dir = PathBuf::new();
        serde_json::to_string(&copy).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("", Path::new("run.cfg")).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = RunConfig::parse("min_pa = 300\n[cohort_bounds]\nlow = 0.1\nin_unit_hi = 0.3\nhigh = 0.8\n", Path::new("x"))
            .unwrap();
        assert_eq!(c.min_pa, 300);
        assert_eq!(c.cohort_bounds.high, 0.8);
        assert!(RunConfig::parse("min_pa_typo = 3", Path::new("x")).is_err());
    }

    #[test]
    fn bad_bounds_rejected() {
        let text = "[cohort_bounds]\nlow = 0.3\nin_unit_hi = 0.2\nhigh = 0.8\n";
        assert!(RunConfig::parse(text, Path::new("x")).is_err());
    }

    #[test]
    fn analyses_list() {
        let a = Analyses::parse_list("did, scm").unwrap();
        assert!(a.did && a.scm && !a.placebos);
        assert_eq!(a.enabled(), vec!["did", "scm"]);
        assert!(matches!(Analyses::parse_list("did,nope"), Err(CliError::UnknownAnalysis(_))));
    }
}
