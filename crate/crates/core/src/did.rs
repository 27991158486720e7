//! Four-cell difference-in-differences on league splits.
//!
//! Left-handed batters are the exposed population, right-handed batters the
//! comparison. For a season pair (pre, post):
//!
//! ```text
//! estimate = (LHB[post] - LHB[pre]) - (RHB[post] - RHB[pre])
//! ```
//!
//! Pairs with post < 2023 are pre-trend diagnostics. The 2023 pair is the
//! effect on the treated; the 2024 pair (against 2023) estimates the change
//! in the effect between the first and second seasons of the ban.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{EffectEstimate, EffectKind, EffectUnit, LeagueSplitSeries, Outcome, Population, Season, SeasonSet};

/// Identifying assumptions behind every DID estimate. These cannot be
/// checked from the data and are attached to every report.
pub const ASSUMPTIONS: [&str; 3] = [
    "consistency and no anticipation: observed outcomes equal untreated potential outcomes before 2023 and treated potential outcomes from 2023 on",
    "no spillover: the ban has no effect on right-handed batter plate appearances",
    "parallel trends: absent the ban, left- and right-handed batter outcomes would have changed by the same expected amount",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidResult {
    pub outcome: Outcome,
    pub pre_year: Season,
    pub year: Season,
    pub lhb_pre: f64,
    pub lhb_post: f64,
    pub rhb_pre: f64,
    pub rhb_post: f64,
    pub lhb_diff: f64,
    pub rhb_diff: f64,
    pub did_estimate: f64,
    /// LHB post value had LHBs followed the RHB change.
    pub counterfactual_post_lhb: f64,
    pub kind: EffectKind,
}

impl DidResult {
    pub fn effect(&self) -> EffectEstimate {
        EffectEstimate {
            outcome: self.outcome,
            unit: EffectUnit::Population(Population::Lhb),
            year: self.year,
            estimate: self.did_estimate,
            kind: self.kind,
        }
    }
}

fn check_pair(lhb: &LeagueSplitSeries, rhb: &LeagueSplitSeries) -> Result<()> {
    if lhb.outcome != rhb.outcome {
        return Err(Error::SeriesMismatch(format!("outcomes {} and {}", lhb.outcome, rhb.outcome)));
    }
    if lhb.population != Population::Lhb || rhb.population != Population::Rhb {
        return Err(Error::SeriesMismatch(format!(
            "expected (LHB, RHB) series, got ({}, {})",
            lhb.population, rhb.population
        )));
    }
    Ok(())
}

/// Kind of estimate a post season produces.
pub fn kind_for(post: Season) -> EffectKind {
    if post < Season::BAN {
        EffectKind::PreTrend
    } else {
        EffectKind::Att
    }
}

fn did_unchecked(lhb: &LeagueSplitSeries, rhb: &LeagueSplitSeries, pre: Season, post: Season) -> Result<DidResult> {
    let lhb_pre = lhb.get(pre)?;
    let lhb_post = lhb.get(post)?;
    let rhb_pre = rhb.get(pre)?;
    let rhb_post = rhb.get(post)?;
    let lhb_diff = lhb_post - lhb_pre;
    let rhb_diff = rhb_post - rhb_pre;
    Ok(DidResult {
        outcome: lhb.outcome,
        pre_year: pre,
        year: post,
        lhb_pre,
        lhb_post,
        rhb_pre,
        rhb_post,
        lhb_diff,
        rhb_diff,
        did_estimate: lhb_diff - rhb_diff,
        counterfactual_post_lhb: lhb_pre + rhb_diff,
        kind: kind_for(post),
    })
}

/// Two-by-two DID estimate for one season pair.
pub fn did_2x2(lhb: &LeagueSplitSeries, rhb: &LeagueSplitSeries, pre: Season, post: Season) -> Result<DidResult> {
    check_pair(lhb, rhb)?;
    if pre >= post {
        return Err(Error::InvariantViolation { field: "season pair".into(), value: format!("{pre} >= {post}") });
    }
    did_unchecked(lhb, rhb, pre, post)
}

/// DID estimates for every consecutive pair of `seasons`, each compared with
/// the previous season in the set (so 2021 is compared with 2019).
pub fn did_series(lhb: &LeagueSplitSeries, rhb: &LeagueSplitSeries, seasons: &SeasonSet) -> Result<Vec<DidResult>> {
    check_pair(lhb, rhb)?;
    if seasons.len() < 2 {
        return Err(Error::InvariantViolation {
            field: "seasons".into(),
            value: format!("{} season(s); need at least 2", seasons.len()),
        });
    }
    let ordered: Vec<Season> = seasons.iter().copied().collect();
    ordered.windows(2).map(|w| did_unchecked(lhb, rhb, w[0], w[1])).collect()
}

/// Scale a split-level effect to the whole league by the split's share of
/// plate appearances, assuming no effect on other plate appearances.
pub fn rescale_att(att: &EffectEstimate, pa_share: f64) -> Result<EffectEstimate> {
    if !(0.0..=1.0).contains(&pa_share) {
        return Err(Error::InvariantViolation { field: "pa_share".into(), value: pa_share.to_string() });
    }
    Ok(EffectEstimate { estimate: att.estimate * pa_share, ..att.clone() })
}

/// One row of the DID report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidReportRow {
    pub outcome: Outcome,
    pub post_year: Season,
    pub pre_year: Season,
    pub lhb_pre: f64,
    pub lhb_post: f64,
    pub rhb_pre: f64,
    pub rhb_post: f64,
    pub did_estimate: f64,
    pub counterfactual_lhb_post: f64,
    pub kind: EffectKind,
}

pub const REPORT_HEADER: &str =
    "outcome,post_year,pre_year,lhb_pre,lhb_post,rhb_pre,rhb_post,did_estimate,counterfactual_lhb_post,kind";

impl From<&DidResult> for DidReportRow {
    fn from(r: &DidResult) -> Self {
        Self {
            outcome: r.outcome,
            post_year: r.year,
            pre_year: r.pre_year,
            lhb_pre: r.lhb_pre,
            lhb_post: r.lhb_post,
            rhb_pre: r.rhb_pre,
            rhb_post: r.rhb_post,
            did_estimate: r.did_estimate,
            counterfactual_lhb_post: r.counterfactual_post_lhb,
            kind: r.kind,
        }
    }
}

impl DidReportRow {
    pub fn csv_fields(&self) -> [String; 10] {
        [
            self.outcome.to_string(),
            self.post_year.to_string(),
            self.pre_year.to_string(),
            self.lhb_pre.to_string(),
            self.lhb_post.to_string(),
            self.rhb_pre.to_string(),
            self.rhb_post.to_string(),
            self.did_estimate.to_string(),
            self.counterfactual_lhb_post.to_string(),
            self.kind.to_string(),
        ]
    }
}

/// JSON form of a DID report: rows plus the assumption caveats.
#[derive(Debug, Clone, Serialize)]
pub struct DidReport {
    pub caveats: Vec<String>,
    pub rows: Vec<DidReportRow>,
}

impl DidReport {
    pub fn new(results: &[DidResult]) -> Self {
        Self { caveats: ASSUMPTIONS.iter().map(|s| s.to_string()).collect(), rows: results.iter().map(Into::into).collect() }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(REPORT_HEADER.split(','))?;
        for row in &self.rows {
            w.write_record(row.csv_fields())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io { path: "<memory>".into(), source: e.into_error() })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    fn s(y: u16) -> Season {
        Season::new(y).unwrap()
    }

    fn series(pop: Population, outcome: Outcome, cells: &[(u16, f64)]) -> LeagueSplitSeries {
        let values: BTreeMap<_, _> = cells.iter().map(|&(y, v)| (s(y), v)).collect();
        LeagueSplitSeries::new(pop, outcome, values, None).unwrap()
    }

    #[test]
    fn babip_table_cells() {
        let l = series(Population::Lhb, Outcome::Babip, &[(2022, 0.275), (2023, 0.287)]);
        let r = series(Population::Rhb, Outcome::Babip, &[(2022, 0.291), (2023, 0.294)]);
        let d = did_2x2(&l, &r, s(2022), s(2023)).unwrap();
        assert!((d.did_estimate - 0.009).abs() < 1e-12);
        assert_eq!(d.did_estimate, (0.287 - 0.275) - (0.294 - 0.291));
        assert_eq!(d.counterfactual_post_lhb, 0.275 + (0.294 - 0.291));
        assert_eq!(d.kind, EffectKind::Att);
    }

    #[test]
    fn identical_series_give_exact_zero() {
        let cells = [(2022, 0.3011), (2023, 0.3179)];
        let l = series(Population::Lhb, Outcome::Obp, &cells);
        let r = series(Population::Rhb, Outcome::Obp, &cells);
        assert_eq!(did_2x2(&l, &r, s(2022), s(2023)).unwrap().did_estimate, 0.0);
    }

    #[test]
    fn missing_season_reported() {
        let l = series(Population::Lhb, Outcome::Obp, &[(2022, 0.3)]);
        let r = series(Population::Rhb, Outcome::Obp, &[(2022, 0.3), (2023, 0.31)]);
        match did_2x2(&l, &r, s(2022), s(2023)) {
            Err(Error::MissingSeason { population, season }) => {
                assert_eq!(population, "LHB");
                assert_eq!(season, s(2023));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn swapped_or_mismatched_series_rejected() {
        let l = series(Population::Lhb, Outcome::Obp, &[(2022, 0.3), (2023, 0.31)]);
        let r = series(Population::Rhb, Outcome::Babip, &[(2022, 0.3), (2023, 0.31)]);
        assert!(did_2x2(&l, &r, s(2022), s(2023)).is_err());
        assert!(did_2x2(&r, &l, s(2022), s(2023)).is_err());
        let r = series(Population::Rhb, Outcome::Obp, &[(2022, 0.3), (2023, 0.31)]);
        assert!(did_2x2(&l, &r, s(2023), s(2022)).is_err());
    }

    #[test]
    fn series_pairs_skip_2020() {
        let cells: Vec<(u16, f64)> = Season::all().map(|x| (x.year(), 0.3 + x.year() as f64 * 1e-4 - 0.2)).collect();
        let l = series(Population::Lhb, Outcome::Obp, &cells);
        let r = series(Population::Rhb, Outcome::Obp, &cells);
        let out = did_series(&l, &r, &Season::all().collect()).unwrap();
        assert_eq!(out.len(), 8);
        let pairs: Vec<_> = out.iter().map(|d| (d.pre_year.year(), d.year.year())).collect();
        assert!(pairs.contains(&(2019, 2021)));
        let kinds: Vec<_> = out.iter().map(|d| d.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == EffectKind::PreTrend).count(), 6);
        assert_eq!(out.last().unwrap().year, s(2024));
        assert_eq!(out.last().unwrap().kind, EffectKind::Att);
    }

    #[test]
    fn single_season_series_is_error() {
        let l = series(Population::Lhb, Outcome::Obp, &[(2022, 0.3)]);
        let r = series(Population::Rhb, Outcome::Obp, &[(2022, 0.3)]);
        assert!(did_series(&l, &r, &[s(2022)].into()).is_err());
    }

    #[test]
    fn rescaling() {
        let att = EffectEstimate::new(Outcome::Obp, EffectUnit::Population(Population::Lhb), s(2023), 0.009, EffectKind::Att)
            .unwrap();
        let scaled = rescale_att(&att, 0.233).unwrap();
        assert!((scaled.estimate - 0.0021).abs() < 1e-4);
        assert_eq!(scaled.kind, EffectKind::Att);
        assert_eq!(rescale_att(&att, 0.0).unwrap().estimate, 0.0);
        assert_eq!(rescale_att(&att, 1.0).unwrap().estimate, 0.009);
        assert!(rescale_att(&att, 1.5).is_err());
    }

    #[test]
    fn report_csv_header() {
        let l = series(Population::Lhb, Outcome::Babip, &[(2022, 0.275), (2023, 0.287)]);
        let r = series(Population::Rhb, Outcome::Babip, &[(2022, 0.291), (2023, 0.294)]);
        let d = did_2x2(&l, &r, s(2022), s(2023)).unwrap();
        let report = DidReport::new(&[d]);
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with(REPORT_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("babip,2023,2022,0.275,0.287,0.291,0.294,"));
        assert!(csv.trim_end().ends_with(",ATT"));
        assert_eq!(report.caveats.len(), 3);
    }

    fn rate() -> impl Strategy<Value = f64> {
        0.0f64..0.6
    }

    proptest! {
        #[test]
        fn swapping_populations_negates(a in rate(), b in rate(), c in rate(), d in rate()) {
            let l = series(Population::Lhb, Outcome::Obp, &[(2022, a), (2023, b)]);
            let r = series(Population::Rhb, Outcome::Obp, &[(2022, c), (2023, d)]);
            let fwd = did_2x2(&l, &r, s(2022), s(2023)).unwrap().did_estimate;
            let l2 = series(Population::Lhb, Outcome::Obp, &[(2022, c), (2023, d)]);
            let r2 = series(Population::Rhb, Outcome::Obp, &[(2022, a), (2023, b)]);
            let back = did_2x2(&l2, &r2, s(2022), s(2023)).unwrap().did_estimate;
            prop_assert_eq!(fwd, -back);
        }

        #[test]
        fn common_shift_leaves_estimate(a in rate(), b in rate(), c in rate(), d in rate(), k in 0.0f64..0.3) {
            let base = {
                let l = series(Population::Lhb, Outcome::Obp, &[(2022, a), (2023, b)]);
                let r = series(Population::Rhb, Outcome::Obp, &[(2022, c), (2023, d)]);
                did_2x2(&l, &r, s(2022), s(2023)).unwrap().did_estimate
            };
            let l = series(Population::Lhb, Outcome::Obp, &[(2022, a + k), (2023, b + k)]);
            let r = series(Population::Rhb, Outcome::Obp, &[(2022, c + k), (2023, d + k)]);
            let shifted = did_2x2(&l, &r, s(2022), s(2023)).unwrap().did_estimate;
            prop_assert!((shifted - base).abs() < 1e-12);
        }
    }
}
