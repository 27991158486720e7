//! Domain model shared by every estimator: seasons, player-season records,
//! league split series, shift cohorts and effect estimates.
//!
//! Everything here is immutable once validated and can be shared freely
//! across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, RecordIssue, Result};

/// A season that may take part in an analysis: 2015 through 2024, never
/// the shortened 2020 season.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Season(u16);

/// Ordered, duplicate-free set of analysis seasons.
pub type SeasonSet = BTreeSet<Season>;

impl Season {
    pub const FIRST_YEAR: u16 = 2015;
    pub const LAST_YEAR: u16 = 2024;
    pub const SHORTENED_YEAR: u16 = 2020;

    /// First season played under the shift restrictions.
    pub const BAN: Season = Season(2023);
    /// Season whose shift rate defines the cohorts.
    pub const SHIFT_RATING: Season = Season(2022);

    pub fn new(year: u16) -> Result<Self> {
        if !(Self::FIRST_YEAR..=Self::LAST_YEAR).contains(&year) || year == Self::SHORTENED_YEAR {
            return Err(Error::InvariantViolation {
                field: "season".into(),
                value: year.to_string(),
            });
        }
        Ok(Season(year))
    }

    pub fn year(self) -> u16 {
        self.0
    }

    /// All nine analysis seasons in order.
    pub fn all() -> impl Iterator<Item = Season> {
        (Self::FIRST_YEAR..=Self::LAST_YEAR)
            .filter(|&y| y != Self::SHORTENED_YEAR)
            .map(Season)
    }

    /// Seasons from `first` through `last` inclusive, skipping 2020.
    pub fn range(first: Season, last: Season) -> SeasonSet {
        Self::all().filter(|s| *s >= first && *s <= last).collect()
    }

    /// The previous full season (2021 maps to 2019).
    pub fn previous(self) -> Option<Season> {
        Self::all().filter(|s| *s < self).last()
    }

    pub fn next(self) -> Option<Season> {
        Self::all().find(|s| *s > self)
    }

    pub fn is_pre_2020(self) -> bool {
        self.0 < Self::SHORTENED_YEAR
    }
}

impl TryFrom<u16> for Season {
    type Error = Error;

    fn try_from(year: u16) -> Result<Self> {
        Season::new(year)
    }
}

impl From<Season> for u16 {
    fn from(s: Season) -> u16 {
        s.0
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque player identifier; the join key between every input file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

/// Batter population for the league-wide split comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Population {
    #[serde(rename = "LHB")]
    Lhb,
    #[serde(rename = "RHB")]
    Rhb,
}

impl Population {
    pub fn code(self) -> &'static str {
        match self {
            Population::Lhb => "L",
            Population::Rhb => "R",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "L" => Some(Population::Lhb),
            "R" => Some(Population::Rhb),
            _ => None,
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::Lhb => "LHB",
            Population::Rhb => "RHB",
        })
    }
}

/// Season-level rate statistic used as an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Babip,
    Obp,
    Avg,
    Slg,
    Ops,
    Woba,
    BbPct,
    KPct,
}

impl Outcome {
    /// Column order of the league splits file.
    pub const ALL: [Outcome; 8] = [
        Outcome::Babip,
        Outcome::Obp,
        Outcome::Avg,
        Outcome::Slg,
        Outcome::Ops,
        Outcome::Woba,
        Outcome::BbPct,
        Outcome::KPct,
    ];

    /// Outcomes the synthetic control analysis reports.
    pub const PLAYER: [Outcome; 3] = [Outcome::Obp, Outcome::Ops, Outcome::Woba];

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Babip => "babip",
            Outcome::Obp => "obp",
            Outcome::Avg => "avg",
            Outcome::Slg => "slg",
            Outcome::Ops => "ops",
            Outcome::Woba => "woba",
            Outcome::BbPct => "bb_pct",
            Outcome::KPct => "k_pct",
        }
    }

    /// Inclusive upper bound of the rate. OPS sums two rates.
    pub fn upper_bound(self) -> f64 {
        match self {
            Outcome::Ops => 3.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Outcome::ALL
            .into_iter()
            .find(|o| o.label() == lower)
            .ok_or_else(|| Error::InvariantViolation { field: "outcome".into(), value: s.to_string() })
    }
}

/// Per-season counting and rate statistic used as an SCM covariate, in
/// covariate-row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Pa,
    Hits,
    Singles,
    HomeRuns,
    BbPct,
    KPct,
}

impl Stat {
    pub const ALL: [Stat; 6] = [Stat::Pa, Stat::Hits, Stat::Singles, Stat::HomeRuns, Stat::BbPct, Stat::KPct];

    pub fn label(self) -> &'static str {
        match self {
            Stat::Pa => "pa",
            Stat::Hits => "hits",
            Stat::Singles => "singles",
            Stat::HomeRuns => "home_runs",
            Stat::BbPct => "bb_pct",
            Stat::KPct => "k_pct",
        }
    }
}

/// One player's season line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSeason {
    pub player_id: PlayerId,
    pub name: String,
    pub season: Season,
    pub age: u32,
    pub pa: u32,
    pub hits: u32,
    pub singles: u32,
    pub home_runs: u32,
    pub bb_pct: f64,
    pub k_pct: f64,
    pub obp: f64,
    pub ops: f64,
    pub woba: f64,
}

fn in_range(x: f64, hi: f64) -> bool {
    x.is_finite() && (0.0..=hi).contains(&x)
}

impl PlayerSeason {
    pub fn stat(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Pa => self.pa as f64,
            Stat::Hits => self.hits as f64,
            Stat::Singles => self.singles as f64,
            Stat::HomeRuns => self.home_runs as f64,
            Stat::BbPct => self.bb_pct,
            Stat::KPct => self.k_pct,
        }
    }

    /// Outcome value, for the outcomes a player record carries.
    pub fn outcome(&self, outcome: Outcome) -> Option<f64> {
        match outcome {
            Outcome::Obp => Some(self.obp),
            Outcome::Ops => Some(self.ops),
            Outcome::Woba => Some(self.woba),
            Outcome::BbPct => Some(self.bb_pct),
            Outcome::KPct => Some(self.k_pct),
            _ => None,
        }
    }

    /// Type-invariant violations of this record (empty when valid).
    pub fn issues(&self) -> Vec<RecordIssue> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, value: String| {
            out.push(RecordIssue::InvariantViolation {
                player: self.player_id.clone(),
                season: self.season,
                field,
                value,
            })
        };
        if self.hits > self.pa {
            bad("hits", format!("{} > pa {}", self.hits, self.pa));
        }
        if self.singles > self.hits {
            bad("singles", format!("{} > hits {}", self.singles, self.hits));
        }
        if self.home_runs > self.hits {
            bad("home_runs", format!("{} > hits {}", self.home_runs, self.hits));
        }
        for (field, value, hi) in [
            ("bb_pct", self.bb_pct, 1.0),
            ("k_pct", self.k_pct, 1.0),
            ("obp", self.obp, 1.0),
            ("ops", self.ops, 3.0),
            ("woba", self.woba, 1.5),
        ] {
            if !in_range(value, hi) {
                bad(field, value.to_string());
            }
        }
        out
    }
}

/// Validated player-season panel, unique per (player, season).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelDataset {
    records: BTreeMap<(PlayerId, Season), PlayerSeason>,
}

/// Check uniqueness and type invariants of raw records, rejecting the whole
/// batch with an itemized list when anything is wrong.
pub fn validate_panel(records: Vec<PlayerSeason>) -> Result<PanelDataset> {
    let mut issues = Vec::new();
    let mut map = BTreeMap::new();
    for rec in records {
        issues.extend(rec.issues());
        let key = (rec.player_id.clone(), rec.season);
        if map.contains_key(&key) {
            issues.push(RecordIssue::DuplicateRecord { player: key.0, season: key.1 });
            continue;
        }
        map.insert(key, rec);
    }
    if issues.is_empty() {
        Ok(PanelDataset { records: map })
    } else {
        Err(Error::InvalidRecords(issues))
    }
}

impl PanelDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, player: &PlayerId, season: Season) -> Option<&PlayerSeason> {
        self.records.get(&(player.clone(), season))
    }

    /// Records in (player, season) order.
    pub fn records(&self) -> impl Iterator<Item = &PlayerSeason> {
        self.records.values()
    }

    /// One player's seasons in order.
    pub fn history<'a>(&'a self, player: &'a PlayerId) -> impl Iterator<Item = &'a PlayerSeason> + 'a {
        self.records
            .range((player.clone(), Season(Season::FIRST_YEAR))..)
            .take_while(move |((p, _), _)| p == player)
            .map(|(_, r)| r)
    }

    /// Distinct players in id order.
    pub fn players(&self) -> Vec<PlayerId> {
        let mut out: Vec<PlayerId> = Vec::new();
        for (p, _) in self.records.keys() {
            if out.last() != Some(p) {
                out.push(p.clone());
            }
        }
        out
    }

    pub fn name<'a>(&'a self, player: &'a PlayerId) -> Option<&'a str> {
        self.history(player).next().map(|r| r.name.as_str())
    }

    /// Whether the player has at least `min_pa` in every listed season.
    pub fn covers(&self, player: &PlayerId, seasons: &SeasonSet, min_pa: u32) -> bool {
        seasons
            .iter()
            .all(|&s| self.get(player, s).is_some_and(|r| r.pa >= min_pa))
    }
}

/// League-wide per-season values of one outcome for one batter population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeagueSplitSeries {
    pub population: Population,
    pub outcome: Outcome,
    pub values: BTreeMap<Season, f64>,
    /// Share of all league plate appearances falling in this split.
    pub pa_share: Option<BTreeMap<Season, f64>>,
}

impl LeagueSplitSeries {
    pub fn new(
        population: Population,
        outcome: Outcome,
        values: BTreeMap<Season, f64>,
        pa_share: Option<BTreeMap<Season, f64>>,
    ) -> Result<Self> {
        for (season, v) in &values {
            if !in_range(*v, outcome.upper_bound()) {
                return Err(Error::InvariantViolation {
                    field: format!("{population} {outcome} {season}"),
                    value: v.to_string(),
                });
            }
        }
        for (season, v) in pa_share.iter().flatten() {
            if !in_range(*v, 1.0) {
                return Err(Error::InvariantViolation {
                    field: format!("{population} pa_share {season}"),
                    value: v.to_string(),
                });
            }
        }
        Ok(Self { population, outcome, values, pa_share })
    }

    pub fn get(&self, season: Season) -> Result<f64> {
        self.values
            .get(&season)
            .copied()
            .ok_or_else(|| Error::missing_season(self.population, season))
    }

    pub fn seasons(&self) -> SeasonSet {
        self.values.keys().copied().collect()
    }
}

/// Shift-rate cohort from the 2022 bases-empty shift rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cohort {
    Low,
    Medium,
    InUnitPlacebo,
    High,
}

/// Cohort cut points. `low` and `high` are inclusive on their own side;
/// the in-unit band is `(low, in_unit_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortBounds {
    pub low: f64,
    pub in_unit_hi: f64,
    pub high: f64,
}

impl Default for CohortBounds {
    fn default() -> Self {
        Self { low: 0.15, in_unit_hi: 0.30, high: 0.75 }
    }
}

impl CohortBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.low && self.low < self.in_unit_hi && self.in_unit_hi < self.high && self.high < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvariantViolation {
                field: "cohort_bounds".into(),
                value: format!("({}, {}, {})", self.low, self.in_unit_hi, self.high),
            })
        }
    }

    pub fn classify(&self, shift_rate: f64) -> Cohort {
        if shift_rate >= self.high {
            Cohort::High
        } else if shift_rate <= self.low {
            Cohort::Low
        } else if shift_rate <= self.in_unit_hi {
            Cohort::InUnitPlacebo
        } else {
            Cohort::Medium
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCohort {
    pub player_id: PlayerId,
    pub shift_rate_2022: f64,
    pub cohort: Cohort,
}

/// What an effect estimate measures.
///
/// Estimates are observed-minus-counterfactual differences. The
/// counterfactual (outcome without the ban) is never observed for treated
/// units, so every `Att` is `Y(observed) - Y0(estimated)`; the placebo kinds
/// apply the same estimator where the true effect is expected to be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EffectKind {
    /// Effect on the treated, in a season played under the ban.
    Att,
    /// Same estimator on a pre-ban season pair; should be near zero.
    PreTrend,
    /// Untreated control run as if treated.
    Placebo,
    /// Pretend intervention one season early.
    InTimePlacebo,
    /// Weakly shifted players run as targets.
    InUnitPlacebo,
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectKind::Att => "ATT",
            EffectKind::PreTrend => "PRE_TREND",
            EffectKind::Placebo => "PLACEBO",
            EffectKind::InTimePlacebo => "IN_TIME_PLACEBO",
            EffectKind::InUnitPlacebo => "IN_UNIT_PLACEBO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EffectUnit {
    Population(Population),
    Player(PlayerId),
}

impl fmt::Display for EffectUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectUnit::Population(p) => p.fmt(f),
            EffectUnit::Player(p) => p.fmt(f),
        }
    }
}

/// Signed additive-scale effect of the ban on one outcome for one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub outcome: Outcome,
    pub unit: EffectUnit,
    pub year: Season,
    pub estimate: f64,
    pub kind: EffectKind,
}

impl EffectEstimate {
    pub fn new(outcome: Outcome, unit: EffectUnit, year: Season, estimate: f64, kind: EffectKind) -> Result<Self> {
        let bad_year = match kind {
            EffectKind::PreTrend => year >= Season::BAN,
            EffectKind::Att => year < Season::BAN,
            _ => false,
        };
        if bad_year {
            return Err(Error::InvariantViolation { field: format!("{kind} year"), value: year.to_string() });
        }
        Ok(Self { outcome, unit, year, estimate, kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn season(y: u16) -> Season {
        Season::new(y).unwrap()
    }

    pub(crate) fn record(id: &str, year: u16, pa: u32) -> PlayerSeason {
        PlayerSeason {
            player_id: PlayerId::new(id),
            name: format!("Player {id}"),
            season: season(year),
            age: 28,
            pa,
            hits: pa / 4,
            singles: pa / 6,
            home_runs: pa / 30,
            bb_pct: 0.08,
            k_pct: 0.22,
            obp: 0.320,
            ops: 0.740,
            woba: 0.315,
        }
    }

    #[test]
    fn season_rejects_2020_and_out_of_range() {
        assert!(Season::new(2020).is_err());
        assert!(Season::new(2014).is_err());
        assert!(Season::new(2025).is_err());
        assert_eq!(Season::all().count(), 9);
        assert!(Season::all().all(|s| s.year() != 2020));
    }

    #[test]
    fn previous_season_skips_2020() {
        assert_eq!(season(2021).previous(), Some(season(2019)));
        assert_eq!(season(2019).next(), Some(season(2021)));
        assert_eq!(season(2015).previous(), None);
        assert_eq!(season(2024).next(), None);
    }

    #[test]
    fn season_serde_validates() {
        assert_eq!(serde_json::to_string(&season(2023)).unwrap(), "2023");
        assert!(serde_json::from_str::<Season>("2020").is_err());
        assert_eq!(serde_json::from_str::<Season>("2019").unwrap(), season(2019));
    }

    #[test]
    fn duplicate_record_rejected() {
        let err = validate_panel(vec![record("a", 2022, 500), record("a", 2022, 510)]).unwrap_err();
        match err {
            Error::InvalidRecords(issues) => {
                assert_eq!(issues, vec![RecordIssue::DuplicateRecord { player: "a".into(), season: season(2022) }]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singles_above_hits_rejected() {
        let mut r = record("a", 2022, 500);
        r.singles = r.hits + 1;
        let Error::InvalidRecords(issues) = validate_panel(vec![r]).unwrap_err() else { panic!() };
        assert!(matches!(issues[0], RecordIssue::InvariantViolation { field: "singles", .. }));
    }

    #[test]
    fn every_violation_is_itemized() {
        let mut r = record("a", 2022, 500);
        r.hits = 501;
        r.obp = 1.2;
        r.woba = f64::NAN;
        let Error::InvalidRecords(issues) = validate_panel(vec![r, record("b", 2021, 300)]).unwrap_err() else {
            panic!()
        };
        let fields: Vec<_> = issues
            .iter()
            .map(|i| match i {
                RecordIssue::InvariantViolation { field, .. } => *field,
                _ => "dup",
            })
            .collect();
        assert_eq!(fields, vec!["hits", "obp", "woba"]);
    }

    #[test]
    fn eighty_eight_one_season_records() {
        let recs: Vec<_> = (0..88).map(|i| record(&format!("p{i:03}"), 2022, 400)).collect();
        let panel = validate_panel(recs).unwrap();
        assert_eq!(panel.len(), 88);
        assert_eq!(panel.players().len(), 88);
    }

    #[test]
    fn history_is_per_player_and_ordered() {
        let panel = validate_panel(vec![
            record("b", 2019, 300),
            record("a", 2023, 300),
            record("a", 2015, 300),
            record("ab", 2016, 300),
        ])
        .unwrap();
        let years: Vec<_> = panel.history(&"a".into()).map(|r| r.season.year()).collect();
        assert_eq!(years, vec![2015, 2023]);
        assert_eq!(panel.players(), vec![PlayerId::new("a"), "ab".into(), "b".into()]);
    }

    #[test]
    fn cohort_boundaries() {
        let b = CohortBounds::default();
        assert_eq!(b.classify(0.0), Cohort::Low);
        assert_eq!(b.classify(0.15), Cohort::Low);
        assert_eq!(b.classify(0.150_000_1), Cohort::InUnitPlacebo);
        assert_eq!(b.classify(0.30), Cohort::InUnitPlacebo);
        assert_eq!(b.classify(0.300_000_1), Cohort::Medium);
        assert_eq!(b.classify(0.50), Cohort::Medium);
        assert_eq!(b.classify(0.749_999_9), Cohort::Medium);
        assert_eq!(b.classify(0.75), Cohort::High);
        assert_eq!(b.classify(0.928), Cohort::High);
        assert_eq!(b.classify(1.0), Cohort::High);
    }

    #[test]
    fn cohort_bounds_must_increase() {
        assert!(CohortBounds::default().validate().is_ok());
        assert!(CohortBounds { low: 0.3, in_unit_hi: 0.3, high: 0.75 }.validate().is_err());
        assert!(CohortBounds { low: 0.1, in_unit_hi: 0.3, high: 1.0 }.validate().is_err());
    }

    #[test]
    fn effect_kind_year_invariant() {
        let unit = EffectUnit::Population(Population::Lhb);
        assert!(EffectEstimate::new(Outcome::Obp, unit.clone(), season(2023), 0.0, EffectKind::PreTrend).is_err());
        assert!(EffectEstimate::new(Outcome::Obp, unit.clone(), season(2022), 0.0, EffectKind::Att).is_err());
        assert!(EffectEstimate::new(Outcome::Obp, unit.clone(), season(2022), 0.0, EffectKind::InTimePlacebo).is_ok());
        assert!(EffectEstimate::new(Outcome::Obp, unit, season(2024), 0.0, EffectKind::Att).is_ok());
    }

    #[test]
    fn split_series_range_checked() {
        let values: BTreeMap<_, _> = [(season(2022), 0.9)].into();
        assert!(LeagueSplitSeries::new(Population::Lhb, Outcome::Ops, values.clone(), None).is_ok());
        let values: BTreeMap<_, _> = [(season(2022), 1.2)].into();
        assert!(LeagueSplitSeries::new(Population::Lhb, Outcome::Obp, values.clone(), None).is_err());
        assert!(LeagueSplitSeries::new(Population::Lhb, Outcome::Ops, values, None).is_ok());
    }

    #[test]
    fn outcome_parse() {
        assert_eq!("OBP".parse::<Outcome>().unwrap(), Outcome::Obp);
        assert_eq!("wOBA".parse::<Outcome>().unwrap(), Outcome::Woba);
        assert_eq!("k_pct".parse::<Outcome>().unwrap(), Outcome::KPct);
        assert!("era".parse::<Outcome>().is_err());
    }
}
