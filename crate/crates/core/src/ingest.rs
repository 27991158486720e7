//! Fixture CSV ingestion, season eligibility, shift cohorts and donor pools.
//!
//! Three inputs, each with a fixed header:
//!
//! * `league_splits.csv`: `season,handedness,split,pa,pa_share,babip,obp,avg,slg,ops,woba,bb_pct,k_pct`
//! * `player_seasons.csv`: `player_id,name,season,age,pa,hits,singles,home_runs,bb_pct,k_pct,obp,ops,woba`
//! * `shift_rates.csv`: `player_id,season,shift_pct`
//!
//! Empty or malformed cells are errors; nothing is imputed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{
    validate_panel, CohortBounds, LeagueSplitSeries, Outcome, PanelDataset, PlayerId, PlayerSeason, Population,
    Season, SeasonSet, ShiftCohort,
};
use crate::panel::Cohort;

pub const LEAGUE_SPLITS_HEADER: &str =
    "season,handedness,split,pa,pa_share,babip,obp,avg,slg,ops,woba,bb_pct,k_pct";
pub const PLAYER_SEASONS_HEADER: &str =
    "player_id,name,season,age,pa,hits,singles,home_runs,bb_pct,k_pct,obp,ops,woba";
pub const SHIFT_RATES_HEADER: &str = "player_id,season,shift_pct";

/// The only split the league file may carry.
pub const BASES_EMPTY: &str = "bases_empty";

/// Default plate-appearance threshold for a season to count.
pub const DEFAULT_MIN_PA: u32 = 250;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

struct Rows<R: Read> {
    reader: csv::Reader<R>,
    source: PathBuf,
    columns: Vec<&'static str>,
}

struct Row<'a> {
    record: csv::StringRecord,
    line: u64,
    source: &'a Path,
    columns: &'a [&'static str],
}

impl<R: Read> Rows<R> {
    fn new(input: R, source: &Path, header: &'static str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
        let found = reader.headers()?.iter().collect::<Vec<_>>().join(",");
        if found != header {
            return Err(Error::Schema {
                path: source.to_path_buf(),
                line: 1,
                column: "header".into(),
                message: format!("expected `{header}`, found `{found}`"),
            });
        }
        Ok(Self { reader, source: source.to_path_buf(), columns: header.split(',').collect() })
    }

    fn for_each(mut self, mut f: impl FnMut(Row<'_>) -> Result<()>) -> Result<()> {
        for record in self.reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != self.columns.len() {
                return Err(Error::Schema {
                    path: self.source.clone(),
                    line,
                    column: "*".into(),
                    message: format!("expected {} fields, found {}", self.columns.len(), record.len()),
                });
            }
            f(Row { record, line, source: &self.source, columns: &self.columns })?;
        }
        Ok(())
    }
}

impl Row<'_> {
    fn schema_error(&self, idx: usize, message: impl Into<String>) -> Error {
        Error::Schema {
            path: self.source.to_path_buf(),
            line: self.line,
            column: self.columns[idx].to_string(),
            message: message.into(),
        }
    }

    fn text(&self, idx: usize) -> Result<&str> {
        let cell = self.record[idx].trim();
        if cell.is_empty() {
            return Err(self.schema_error(idx, "missing value"));
        }
        Ok(cell)
    }

    fn parse<T: FromStr>(&self, idx: usize) -> Result<T> {
        let cell = self.text(idx)?;
        cell.parse().map_err(|_| self.schema_error(idx, format!("cannot parse `{cell}`")))
    }

    fn rate(&self, idx: usize, upper: f64) -> Result<f64> {
        let v: f64 = self.parse(idx)?;
        if !v.is_finite() || !(0.0..=upper).contains(&v) {
            return Err(self.schema_error(idx, format!("{v} outside [0, {upper}]")));
        }
        Ok(v)
    }

    /// Rate written as a decimal with at least three places.
    fn decimal_rate(&self, idx: usize, upper: f64) -> Result<f64> {
        let cell = self.text(idx)?;
        let places = cell.split_once('.').map_or(0, |(_, frac)| frac.len());
        if places < 3 {
            return Err(self.schema_error(idx, format!("`{cell}` needs at least 3 decimal places")));
        }
        self.rate(idx, upper)
    }

    fn season(&self, idx: usize) -> Result<Season> {
        Season::new(self.parse(idx)?)
    }
}

/// Parse league split rows into one series per (population, outcome).
pub fn parse_league_splits<R: Read>(input: R, source: &Path) -> Result<Vec<LeagueSplitSeries>> {
    type Cells = BTreeMap<Season, f64>;
    let mut values: BTreeMap<(Population, Outcome), Cells> = BTreeMap::new();
    let mut shares: BTreeMap<Population, Cells> = BTreeMap::new();

    Rows::new(input, source, LEAGUE_SPLITS_HEADER)?.for_each(|row| {
        let season = row.season(0)?;
        let hand = row.text(1)?;
        let population =
            Population::from_code(hand).ok_or_else(|| row.schema_error(1, format!("handedness `{hand}` not L/R")))?;
        let split = row.text(2)?;
        if split != BASES_EMPTY {
            return Err(row.schema_error(2, format!("split `{split}` is not {BASES_EMPTY}")));
        }
        let _pa: u64 = row.parse(3)?;
        let share = row.decimal_rate(4, 1.0)?;
        if shares.entry(population).or_default().insert(season, share).is_some() {
            return Err(row.schema_error(0, format!("duplicate row for ({season}, {hand})")));
        }
        for (offset, outcome) in Outcome::ALL.into_iter().enumerate() {
            let v = row.decimal_rate(5 + offset, outcome.upper_bound())?;
            values.entry((population, outcome)).or_default().insert(season, v);
        }
        Ok(())
    })?;

    values
        .into_iter()
        .map(|((population, outcome), cells)| {
            LeagueSplitSeries::new(population, outcome, cells, shares.get(&population).cloned())
        })
        .collect()
}

pub fn load_league_splits(path: impl AsRef<Path>) -> Result<Vec<LeagueSplitSeries>> {
    let path = path.as_ref();
    parse_league_splits(open(path)?, path)
}

/// Find the series for one population and outcome.
pub fn find_series(
    series: &[LeagueSplitSeries],
    population: Population,
    outcome: Outcome,
) -> Option<&LeagueSplitSeries> {
    series.iter().find(|s| s.population == population && s.outcome == outcome)
}

pub fn parse_player_seasons<R: Read>(input: R, source: &Path) -> Result<PanelDataset> {
    let mut records = Vec::new();
    Rows::new(input, source, PLAYER_SEASONS_HEADER)?.for_each(|row| {
        records.push(PlayerSeason {
            player_id: PlayerId::new(row.text(0)?),
            name: row.record[1].trim().to_string(),
            season: row.season(2)?,
            age: row.parse(3)?,
            pa: row.parse(4)?,
            hits: row.parse(5)?,
            singles: row.parse(6)?,
            home_runs: row.parse(7)?,
            bb_pct: row.parse(8)?,
            k_pct: row.parse(9)?,
            obp: row.parse(10)?,
            ops: row.parse(11)?,
            woba: row.parse(12)?,
        });
        Ok(())
    })?;
    validate_panel(records)
}

pub fn load_player_seasons(path: impl AsRef<Path>) -> Result<PanelDataset> {
    let path = path.as_ref();
    parse_player_seasons(open(path)?, path)
}

/// Write a panel in `player_seasons.csv` layout. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_player_seasons<W: Write>(panel: &PanelDataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(PLAYER_SEASONS_HEADER.split(','))?;
    for r in panel.records() {
        w.write_record([
            r.player_id.to_string(),
            r.name.clone(),
            r.season.to_string(),
            r.age.to_string(),
            r.pa.to_string(),
            r.hits.to_string(),
            r.singles.to_string(),
            r.home_runs.to_string(),
            r.bb_pct.to_string(),
            r.k_pct.to_string(),
            r.obp.to_string(),
            r.ops.to_string(),
            r.woba.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io { path: PathBuf::from("<writer>"), source })?;
    Ok(())
}

/// Bases-empty shift rates keyed by (player, season).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShiftRates(pub BTreeMap<(PlayerId, Season), f64>);

impl ShiftRates {
    pub fn get(&self, player: &PlayerId, season: Season) -> Option<f64> {
        self.0.get(&(player.clone(), season)).copied()
    }
}

pub fn parse_shift_rates<R: Read>(input: R, source: &Path) -> Result<ShiftRates> {
    let mut rates = BTreeMap::new();
    Rows::new(input, source, SHIFT_RATES_HEADER)?.for_each(|row| {
        let player = PlayerId::new(row.text(0)?);
        let season = row.season(1)?;
        let rate = row.rate(2, 1.0)?;
        if rates.insert((player.clone(), season), rate).is_some() {
            return Err(row.schema_error(0, format!("duplicate shift rate for ({player}, {season})")));
        }
        Ok(())
    })?;
    Ok(ShiftRates(rates))
}

pub fn load_shift_rates(path: impl AsRef<Path>) -> Result<ShiftRates> {
    let path = path.as_ref();
    parse_shift_rates(open(path)?, path)
}

/// Analysis seasons in which the player reached `min_pa`.
pub fn eligible_seasons<'a>(history: impl IntoIterator<Item = &'a PlayerSeason>, min_pa: u32) -> SeasonSet {
    history.into_iter().filter(|r| r.pa >= min_pa).map(|r| r.season).collect()
}

/// Seasons a player must have reached the PA threshold in to be rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortGate {
    pub seasons: SeasonSet,
    pub min_pa: u32,
}

impl CohortGate {
    /// 2021 through 2023, the main analysis gate.
    pub fn main(min_pa: u32) -> Self {
        Self { seasons: Season::range(Season::new(2021).unwrap(), Season::BAN), min_pa }
    }

    pub fn admits(&self, panel: &PanelDataset, player: &PlayerId) -> bool {
        panel.covers(player, &self.seasons, self.min_pa)
    }
}

/// Rate every gated player by their 2022 shift rate.
///
/// Players failing the gate are dropped before rating; a gated player
/// without a 2022 rate is an error.
pub fn build_cohorts(
    shift_rates: &ShiftRates,
    panel: &PanelDataset,
    gate: &CohortGate,
    bounds: &CohortBounds,
) -> Result<Vec<ShiftCohort>> {
    bounds.validate()?;
    panel
        .players()
        .into_iter()
        .filter(|p| gate.admits(panel, p))
        .map(|player| {
            let rate = shift_rates
                .get(&player, Season::SHIFT_RATING)
                .ok_or_else(|| Error::MissingShiftRate(player.clone()))?;
            Ok(ShiftCohort { cohort: bounds.classify(rate), shift_rate_2022: rate, player_id: player })
        })
        .collect()
}

/// Members of one cohort in id order.
pub fn cohort_members(cohorts: &[ShiftCohort], cohort: Cohort) -> Vec<PlayerId> {
    cohorts.iter().filter(|c| c.cohort == cohort).map(|c| c.player_id.clone()).collect()
}

pub fn cohort_counts(cohorts: &[ShiftCohort]) -> BTreeMap<Cohort, usize> {
    let mut counts = BTreeMap::new();
    for c in cohorts {
        *counts.entry(c.cohort).or_insert(0) += 1;
    }
    counts
}

/// Controls eligible to be blended into one target's synthetic control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorPool {
    pub target_id: PlayerId,
    pub required_seasons: SeasonSet,
    pub donor_ids: Vec<PlayerId>,
}

/// The target's eligible seasons up to and including `through`.
pub fn required_seasons(target: &PlayerId, panel: &PanelDataset, through: Season, min_pa: u32) -> SeasonSet {
    eligible_seasons(panel.history(target), min_pa).into_iter().filter(|s| *s <= through).collect()
}

/// Restrict `controls` to players (other than the target) reaching
/// `min_pa` in every required season. Excluded controls are equivalent to
/// a donor weight pinned at zero.
pub fn build_donor_pool(
    target: &PlayerId,
    controls: &[PlayerId],
    panel: &PanelDataset,
    required: &SeasonSet,
    min_pa: u32,
) -> Result<DonorPool> {
    let mut donor_ids: Vec<PlayerId> = controls
        .iter()
        .filter(|c| *c != target && panel.covers(c, required, min_pa))
        .cloned()
        .collect();
    donor_ids.sort();
    donor_ids.dedup();
    if donor_ids.is_empty() {
        return Err(Error::EmptyDonorPool(target.clone()));
    }
    Ok(DonorPool { target_id: target.clone(), required_seasons: required.clone(), donor_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(y: u16) -> Season {
        Season::new(y).unwrap()
    }

    const SPLITS: &str = "\
season,handedness,split,pa,pa_share,babip,obp,avg,slg,ops,woba,bb_pct,k_pct
2022,L,bases_empty,40000,0.231,0.275,0.2994,0.235,0.390,0.6894,0.300,0.080,0.215
2022,R,bases_empty,60000,0.340,0.291,0.3030,0.245,0.400,0.7030,0.305,0.075,0.220
";

    #[test]
    fn league_row_lands_in_series() {
        let series = parse_league_splits(SPLITS.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(series.len(), 16);
        let babip = find_series(&series, Population::Lhb, Outcome::Babip).unwrap();
        assert_eq!(babip.get(s(2022)).unwrap(), 0.275);
        assert_eq!(babip.pa_share.as_ref().unwrap()[&s(2022)], 0.231);
    }

    #[test]
    fn bad_handedness_is_schema_error() {
        let text = SPLITS.replace("2022,R,", "2022,S,");
        let err = parse_league_splits(text.as_bytes(), Path::new("mem")).unwrap_err();
        match err {
            Error::Schema { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "handedness");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn season_2020_rejected() {
        let text = SPLITS.replace("2022,R,", "2020,R,");
        assert!(matches!(
            parse_league_splits(text.as_bytes(), Path::new("mem")),
            Err(Error::InvariantViolation { .. })
        ));
    }

    #[test]
    fn header_must_match_exactly() {
        let text = SPLITS.replace("pa_share", "share");
        assert!(matches!(parse_league_splits(text.as_bytes(), Path::new("mem")), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn empty_cell_is_an_error() {
        let text = SPLITS.replace("0.2994", "");
        assert!(matches!(parse_league_splits(text.as_bytes(), Path::new("mem")), Err(Error::Schema { .. })));
    }

    #[test]
    fn short_decimal_rejected() {
        let text = SPLITS.replace("0.2994", "0.3");
        assert!(matches!(parse_league_splits(text.as_bytes(), Path::new("mem")), Err(Error::Schema { .. })));
    }

    #[test]
    fn wrong_split_rejected() {
        let text = SPLITS.replace("2022,L,bases_empty", "2022,L,men_on");
        assert!(matches!(parse_league_splits(text.as_bytes(), Path::new("mem")), Err(Error::Schema { .. })));
    }

    fn rec(year: u16, pa: u32) -> PlayerSeason {
        PlayerSeason {
            player_id: "seager".into(),
            name: "Corey Seager".into(),
            season: s(year),
            age: 28,
            pa,
            hits: pa / 4,
            singles: pa / 7,
            home_runs: pa / 25,
            bb_pct: 0.09,
            k_pct: 0.16,
            obp: 0.33,
            ops: 0.85,
            woba: 0.35,
        }
    }

    #[test]
    fn seager_style_eligibility() {
        let history = [
            rec(2015, 113),
            rec(2016, 687),
            rec(2017, 613),
            rec(2018, 115),
            rec(2019, 541),
            rec(2021, 409),
            rec(2022, 663),
        ];
        let got = eligible_seasons(&history, DEFAULT_MIN_PA);
        let want: SeasonSet = [2016, 2017, 2019, 2021, 2022].into_iter().map(s).collect();
        assert_eq!(got, want);
        assert_eq!(eligible_seasons(&history[..1], DEFAULT_MIN_PA), SeasonSet::new());
        let all: Vec<_> = Season::all().map(|x| rec(x.year(), 600)).collect();
        assert_eq!(eligible_seasons(&all, DEFAULT_MIN_PA).len(), 9);
    }

    #[test]
    fn donor_pool_requires_coverage_and_excludes_target() {
        let mk = |id: &str, years: &[u16]| -> Vec<PlayerSeason> {
            years
                .iter()
                .map(|&y| {
                    let mut r = rec(y, 500);
                    r.player_id = id.into();
                    r
                })
                .collect()
        };
        let mut recs = mk("t", &[2019, 2021, 2022]);
        recs.extend(mk("a", &[2019, 2021, 2022]));
        recs.extend(mk("b", &[2021, 2022]));
        let panel = validate_panel(recs).unwrap();
        let controls: Vec<PlayerId> = vec!["b".into(), "a".into(), "t".into()];
        let req: SeasonSet = [s(2021), s(2022)].into();
        let pool = build_donor_pool(&"t".into(), &controls, &panel, &req, 250).unwrap();
        assert_eq!(pool.donor_ids, vec![PlayerId::new("a"), "b".into()]);
        let req: SeasonSet = [s(2019), s(2021), s(2022)].into();
        let pool = build_donor_pool(&"t".into(), &controls, &panel, &req, 250).unwrap();
        assert_eq!(pool.donor_ids, vec![PlayerId::new("a")]);
        assert!(matches!(
            build_donor_pool(&"t".into(), &[], &panel, &req, 250),
            Err(Error::EmptyDonorPool(_))
        ));
    }
}
