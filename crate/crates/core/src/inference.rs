//! Placebo inference, MSPE ratios and the dose-response line.
//!
//! Placebo ranks indicate how reliable an estimate is; they are not strict
//! hypothesis tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{EffectKind, Outcome, PanelDataset, PlayerId, Season};
use crate::scm::{fit_target, FitDesign, ScmFit, SolverConfig};

/// Printed alongside every table of placebo p-values.
pub const PLACEBO_CAVEAT: &str = "Placebo p-values indicate how unusual an estimate is relative to untreated \
players; they are a reliability indicator rather than a strict hypothesis test.";

/// Below this pre-period MSPE the post/pre ratio is not reported.
pub const MIN_PRE_MSPE: f64 = 1e-12;

/// One attempted placebo fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboEntry {
    pub player_id: PlayerId,
    pub estimate: Option<f64>,
    pub pre_rmspe: Option<f64>,
    pub mspe_ratio: Option<f64>,
    /// Why the fit (or its ratio) could not be computed.
    pub failure: Option<String>,
}

impl PlaceboEntry {
    fn from_fit(player_id: PlayerId, fit: Result<ScmFit>) -> (Self, Option<ScmFit>) {
        match fit {
            Ok(fit) => {
                let (mspe_ratio, failure) = match mspe_ratio(&fit, &fit.post_seasons.iter().copied().collect::<Vec<_>>()) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let entry = Self {
                    player_id,
                    estimate: Some(fit.headline_effect()),
                    pre_rmspe: Some(fit.pre_rmspe),
                    mspe_ratio,
                    failure,
                };
                (entry, Some(fit))
            }
            Err(e) => {
                (Self { player_id, estimate: None, pre_rmspe: None, mspe_ratio: None, failure: Some(e.to_string()) }, None)
            }
        }
    }
}

/// Placebo estimates for one outcome, in player id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboDistribution {
    pub outcome: Outcome,
    pub intervention_year: Season,
    pub kind: EffectKind,
    pub entries: Vec<PlaceboEntry>,
}

impl PlaceboDistribution {
    /// Estimates from successful fits.
    pub fn estimates(&self) -> Vec<f64> {
        self.entries.iter().filter_map(|e| e.estimate).collect()
    }

    /// Entries whose fit failed outright; they are left out of ranks.
    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.estimate.is_none()).count()
    }

    pub fn share_positive(&self) -> Option<f64> {
        let est = self.estimates();
        (!est.is_empty()).then(|| est.iter().filter(|e| **e > 0.0).count() as f64 / est.len() as f64)
    }
}

/// A placebo run: the distribution plus the successful fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboRun {
    pub distribution: PlaceboDistribution,
    pub fits: Vec<ScmFit>,
}

/// Fit each unit against `controls` (itself excluded) and collect the
/// distribution in player id order.
#[allow(clippy::too_many_arguments)]
pub fn run_placebo_fits(
    units: &[PlayerId],
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    design: &FitDesign,
    kind: EffectKind,
    min_pa: u32,
    cfg: &SolverConfig,
) -> PlaceboRun {
    let mut units = units.to_vec();
    units.sort();
    let results: Vec<(PlaceboEntry, Option<ScmFit>)> = units
        .par_iter()
        .map(|unit| {
            let fit = fit_target(unit, controls, panel, outcome, design, min_pa, cfg).and_then(|f| f.relabel(kind));
            PlaceboEntry::from_fit(unit.clone(), fit)
        })
        .collect();
    let (entries, fits): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    PlaceboRun {
        distribution: PlaceboDistribution { outcome, intervention_year: design.intervention_year, kind, entries },
        fits: fits.into_iter().flatten().collect(),
    }
}

/// Run every control as if treated, with itself left out of its own pool.
pub fn run_in_space_placebos(
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    min_pa: u32,
    cfg: &SolverConfig,
) -> PlaceboRun {
    run_placebo_fits(controls, controls, panel, outcome, &FitDesign::main(), EffectKind::Placebo, min_pa, cfg)
}

/// Run weakly shifted players as targets against the true controls.
pub fn run_in_unit_placebos(
    in_unit: &[PlayerId],
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    min_pa: u32,
    cfg: &SolverConfig,
) -> PlaceboRun {
    run_placebo_fits(in_unit, controls, panel, outcome, &FitDesign::main(), EffectKind::InUnitPlacebo, min_pa, cfg)
}

/// Run the targets as if the intervention came in 2022.
pub fn run_in_time_placebo(
    targets: &[PlayerId],
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    min_pa: u32,
    cfg: &SolverConfig,
) -> PlaceboRun {
    run_placebo_fits(targets, controls, panel, outcome, &FitDesign::in_time(), EffectKind::InTimePlacebo, min_pa, cfg)
}

/// Share of the placebos plus the target itself whose absolute estimate
/// the target ties or falls below: `(1 + #{|p| >= |t|}) / (1 + n)`.
pub fn placebo_p_value(target_estimate: f64, distribution: &PlaceboDistribution) -> Result<f64> {
    let estimates = distribution.estimates();
    if estimates.is_empty() {
        return Err(Error::InvariantViolation { field: "placebo distribution".into(), value: "empty".into() });
    }
    let t = target_estimate.abs();
    let at_least = estimates.iter().filter(|p| p.abs() >= t).count();
    Ok((1 + at_least) as f64 / (1 + estimates.len()) as f64)
}

/// Post-period MSPE over pre-period MSPE.
pub fn mspe_ratio(fit: &ScmFit, post_years: &[Season]) -> Result<f64> {
    let mean_sq = |seasons: &mut dyn Iterator<Item = Season>| -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for season in seasons {
            let point = fit.point(season).ok_or_else(|| Error::MissingSeason { population: fit.target_id.to_string(), season })?;
            total += point.gap().powi(2);
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvariantViolation { field: "mspe seasons".into(), value: "empty".into() });
        }
        Ok(total / n as f64)
    };
    let pre = mean_sq(&mut fit.pre_seasons.iter().copied())?;
    if pre < MIN_PRE_MSPE {
        return Err(Error::DegeneratePreFit(pre));
    }
    let post = mean_sq(&mut post_years.iter().copied())?;
    Ok(post / pre)
}

/// Least-squares line of effect on 2022 shift rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseResponse {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

impl DoseResponse {
    pub fn predict(&self, shift_rate: f64) -> f64 {
        self.intercept + self.slope * shift_rate
    }
}

/// Ordinary least squares of effect on shift rate.
pub fn dose_response_fit(points: &[(f64, f64)]) -> Result<DoseResponse> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateDesign(format!("{n} point(s)")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateDesign("all shift rates are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(DoseResponse { slope, intercept: my - slope * mx, n })
}

/// Header of the distribution dump.
pub const DISTRIBUTION_HEADER: &str = "player_id,outcome,estimate,pre_rmspe,mspe_ratio,is_target,p_value";

/// One line of the distribution dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub player_id: PlayerId,
    pub outcome: Outcome,
    pub estimate: Option<f64>,
    pub pre_rmspe: Option<f64>,
    pub mspe_ratio: Option<f64>,
    pub is_target: bool,
    pub p_value: Option<f64>,
}

impl DistributionRow {
    pub fn csv_fields(&self) -> [String; 7] {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.player_id.to_string(),
            self.outcome.label().to_string(),
            opt(self.estimate),
            opt(self.pre_rmspe),
            opt(self.mspe_ratio),
            self.is_target.to_string(),
            opt(self.p_value),
        ]
    }
}

/// Placebo rows followed by target rows, each target with its p-value.
pub fn distribution_rows(distribution: &PlaceboDistribution, targets: &[ScmFit]) -> Result<Vec<DistributionRow>> {
    let mut rows: Vec<DistributionRow> = distribution
        .entries
        .iter()
        .map(|e| DistributionRow {
            player_id: e.player_id.clone(),
            outcome: distribution.outcome,
            estimate: e.estimate,
            pre_rmspe: e.pre_rmspe,
            mspe_ratio: e.mspe_ratio,
            is_target: false,
            p_value: None,
        })
        .collect();
    for fit in targets {
        let post: Vec<Season> = fit.post_seasons.iter().copied().collect();
        let estimate = fit.headline_effect();
        rows.push(DistributionRow {
            player_id: fit.target_id.clone(),
            outcome: fit.outcome,
            estimate: Some(estimate),
            pre_rmspe: Some(fit.pre_rmspe),
            mspe_ratio: mspe_ratio(fit, &post).ok(),
            is_target: true,
            p_value: Some(placebo_p_value(estimate, distribution)?),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(estimates: &[f64]) -> PlaceboDistribution {
        PlaceboDistribution {
            outcome: Outcome::Obp,
            intervention_year: Season::BAN,
            kind: EffectKind::Placebo,
            entries: estimates
                .iter()
                .enumerate()
                .map(|(i, &e)| PlaceboEntry {
                    player_id: PlayerId::new(format!("c{i:02}")),
                    estimate: Some(e),
                    pre_rmspe: Some(0.01),
                    mspe_ratio: Some(1.0),
                    failure: None,
                })
                .collect(),
        }
    }

    #[test]
    fn p_value_counts_target_itself() {
        let d = dist(&[0.01; 58]);
        assert!((placebo_p_value(0.05, &d).unwrap() - 1.0 / 59.0).abs() < 1e-15);
        let mut three = vec![0.01; 55];
        three.extend([0.05, -0.06, 0.05]);
        assert!((placebo_p_value(0.05, &dist(&three)).unwrap() - 4.0 / 59.0).abs() < 1e-15);
        assert_eq!(placebo_p_value(0.0, &dist(&[0.1, -0.2])).unwrap(), 1.0);
    }

    #[test]
    fn failed_entries_are_excluded_from_ranks() {
        let mut d = dist(&[0.01, 0.02]);
        d.entries.push(PlaceboEntry {
            player_id: PlayerId::new("c99"),
            estimate: None,
            pre_rmspe: None,
            mspe_ratio: None,
            failure: Some("donor pool for c99 is empty".into()),
        });
        assert_eq!(d.failed(), 1);
        assert!((placebo_p_value(1.0, &d).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_distribution_is_an_error() {
        assert!(placebo_p_value(0.1, &dist(&[])).is_err());
    }

    #[test]
    fn two_point_line() {
        let fit = dose_response_fit(&[(0.8, 0.1), (0.9, 0.2)]).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept + 0.7).abs() < 1e-12);
    }

    #[test]
    fn flat_and_degenerate_designs() {
        let fit = dose_response_fit(&[(0.8, 0.0), (0.9, 0.0), (0.95, 0.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(matches!(dose_response_fit(&[(0.8, 0.1), (0.8, 0.3)]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(dose_response_fit(&[(0.8, 0.1)]), Err(Error::DegenerateDesign(_))));
    }
}
