//! Synthetic control: covariate assembly, nested weight optimization and
//! counterfactual projection for individual players.
//!
//! Covariate rows are divided by their donor-pool standard deviation before
//! weighting. Plate appearances and rates differ by orders of magnitude, so
//! without this the PA rows would dominate the donor match. Donor weights
//! are sensitive to this choice more than to any other.

pub mod nelder_mead;
pub mod simplex;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{build_donor_pool, build_cohorts, cohort_members, eligible_seasons, CohortGate, DonorPool, ShiftRates};
use crate::panel::{
    Cohort, CohortBounds, EffectEstimate, EffectKind, EffectUnit, Outcome, PanelDataset, PlayerId, Season, SeasonSet,
    Stat,
};

pub use simplex::{InnerConfig, InnerMethod};

/// One matching row: the target's value and each donor's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub label: String,
    pub target: f64,
    pub donors: Vec<f64>,
    /// Donor-pool sample standard deviation (1.0 when degenerate).
    pub scale: f64,
}

impl CovariateRow {
    fn new(label: String, target: f64, donors: Vec<f64>) -> Self {
        let scale = sample_sd(&donors).filter(|s| s.is_finite() && *s > 1e-12).unwrap_or(1.0);
        Self { label, target, donors, scale }
    }
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Some((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Everything needed to fit one target's synthetic control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmProblem {
    pub target_id: PlayerId,
    pub donor_pool: DonorPool,
    pub outcome: Outcome,
    pub intervention_year: Season,
    /// Target's eligible seasons before the intervention.
    pub pre_seasons: SeasonSet,
    /// Seasons projected forward and compared with the observed outcome.
    pub post_seasons: SeasonSet,
    /// Seasons whose prediction error selects the importance weights.
    pub validation_seasons: SeasonSet,
    pub covariate_rows: Vec<CovariateRow>,
    pub target_outcomes: BTreeMap<Season, f64>,
    /// Per season, one value per donor in `donor_pool.donor_ids` order.
    pub donor_outcomes: BTreeMap<Season, Vec<f64>>,
}

impl ScmProblem {
    pub fn donor_count(&self) -> usize {
        self.donor_pool.donor_ids.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.covariate_rows.iter().map(|r| r.label.clone()).collect()
    }

    /// `sum_j w_j * donor_j` for one season.
    pub fn synthetic(&self, season: Season, w: &[f64]) -> Result<f64> {
        let values = self
            .donor_outcomes
            .get(&season)
            .ok_or_else(|| Error::MissingSeason { population: "donor pool".into(), season })?;
        Ok(values.iter().zip(w).map(|(d, w)| d * w).sum())
    }

    /// Mean squared prediction error over the validation seasons.
    pub fn validation_mspe(&self, w: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for &season in &self.validation_seasons {
            let err = self.target_outcomes[&season] - self.synthetic(season, w)?;
            total += err * err;
        }
        Ok(total / self.validation_seasons.len() as f64)
    }

    fn default_kind(&self) -> EffectKind {
        if self.intervention_year >= Season::BAN {
            EffectKind::Att
        } else {
            EffectKind::InTimePlacebo
        }
    }
}

/// Intervention timing for a family of fits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitDesign {
    pub intervention_year: Season,
    pub post_seasons: SeasonSet,
}

impl FitDesign {
    /// Ban season, estimated in 2023.
    pub fn main() -> Self {
        Self { intervention_year: Season::BAN, post_seasons: [Season::BAN].into() }
    }

    /// Pretend the ban came in 2022; only pre-ban data is used.
    pub fn in_time() -> Self {
        let year = Season::SHIFT_RATING;
        Self { intervention_year: year, post_seasons: [year].into() }
    }

    /// Ban season, estimated in 2023 and 2024.
    pub fn extension() -> Self {
        Self { intervention_year: Season::BAN, post_seasons: Season::range(Season::BAN, Season::new(2024).unwrap()) }
    }

    /// Seasons a donor must have reached `min_pa` in: the target's eligible
    /// pre-intervention seasons plus the post seasons.
    pub fn required_seasons(&self, target: &PlayerId, panel: &PanelDataset, min_pa: u32) -> SeasonSet {
        let mut seasons: SeasonSet = eligible_seasons(panel.history(target), min_pa)
            .into_iter()
            .filter(|s| *s < self.intervention_year)
            .collect();
        seasons.extend(self.post_seasons.iter().copied());
        seasons
    }

    pub fn donor_pool(&self, target: &PlayerId, controls: &[PlayerId], panel: &PanelDataset, min_pa: u32) -> Result<DonorPool> {
        build_donor_pool(target, controls, panel, &self.required_seasons(target, panel, min_pa), min_pa)
    }
}

fn player_outcome(panel: &PanelDataset, player: &PlayerId, outcome: Outcome, season: Season) -> Result<f64> {
    panel
        .get(player, season)
        .and_then(|r| r.outcome(outcome))
        .ok_or_else(|| Error::MissingCovariate { player: player.clone(), label: format!("{}_{season}", outcome.label()) })
}

fn player_value(
    panel: &PanelDataset,
    player: &PlayerId,
    season: Season,
    label: &str,
    get: impl Fn(&crate::panel::PlayerSeason) -> f64,
) -> Result<f64> {
    panel
        .get(player, season)
        .map(get)
        .ok_or_else(|| Error::MissingCovariate { player: player.clone(), label: label.to_string() })
}

/// Build the covariate rows and outcome matrix for one target.
///
/// Pre seasons are the pool's required seasons before the intervention;
/// post seasons are the rest. Rows: the outcome in each pre season
/// (ascending), age in the season before the intervention, then for each
/// of PA, hits, singles, home runs, BB% and K% the 2022 value, the 2021
/// value and the mean over pre-2020 pre seasons. Seasons at or after the
/// intervention never enter a row.
pub fn assemble_problem(
    target: &PlayerId,
    pool: &DonorPool,
    outcome: Outcome,
    panel: &PanelDataset,
    intervention_year: Season,
) -> Result<ScmProblem> {
    if pool.donor_ids.is_empty() {
        return Err(Error::EmptyDonorPool(target.clone()));
    }
    let pre_seasons: SeasonSet = pool.required_seasons.iter().copied().filter(|s| *s < intervention_year).collect();
    let post_seasons: SeasonSet = pool.required_seasons.iter().copied().filter(|s| *s >= intervention_year).collect();
    if pre_seasons.is_empty() {
        return Err(Error::MissingCovariate { player: target.clone(), label: format!("{}_pre", outcome.label()) });
    }
    if post_seasons.is_empty() {
        return Err(Error::MissingSeason { population: target.to_string(), season: intervention_year });
    }
    let donors = &pool.donor_ids;
    let mut rows = Vec::new();

    for &season in &pre_seasons {
        let label = format!("{}_{season}", outcome.label());
        let t = player_outcome(panel, target, outcome, season)?;
        let d = donors.iter().map(|p| player_outcome(panel, p, outcome, season)).collect::<Result<Vec<_>>>()?;
        rows.push(CovariateRow::new(label, t, d));
    }

    let age_season = intervention_year.previous().expect("intervention follows an analysis season");
    let age_label = format!("age_{age_season}");
    let age = |p: &PlayerId| player_value(panel, p, age_season, &age_label, |r| r.age as f64);
    rows.push(CovariateRow::new(age_label.clone(), age(target)?, donors.iter().map(age).collect::<Result<_>>()?));

    let recent: Vec<Season> = [2022, 2021]
        .into_iter()
        .map(|y| Season::new(y).unwrap())
        .filter(|s| *s < intervention_year)
        .collect();
    let early: Vec<Season> = pre_seasons.iter().copied().filter(|s| s.is_pre_2020()).collect();

    for stat in Stat::ALL {
        for &season in &recent {
            let label = format!("{}_{season}", stat.label());
            let get = |p: &PlayerId| player_value(panel, p, season, &label, |r| r.stat(stat));
            rows.push(CovariateRow::new(label.clone(), get(target)?, donors.iter().map(get).collect::<Result<_>>()?));
        }
        if !early.is_empty() {
            let label = format!("{}_pre2020", stat.label());
            let mean = |p: &PlayerId| -> Result<f64> {
                let mut total = 0.0;
                for &season in &early {
                    total += player_value(panel, p, season, &label, |r| r.stat(stat))?;
                }
                Ok(total / early.len() as f64)
            };
            rows.push(CovariateRow::new(label.clone(), mean(target)?, donors.iter().map(mean).collect::<Result<_>>()?));
        }
    }

    let mut target_outcomes = BTreeMap::new();
    let mut donor_outcomes = BTreeMap::new();
    for &season in pre_seasons.iter().chain(&post_seasons) {
        target_outcomes.insert(season, player_outcome(panel, target, outcome, season)?);
        let d = donors.iter().map(|p| player_outcome(panel, p, outcome, season)).collect::<Result<Vec<_>>>()?;
        donor_outcomes.insert(season, d);
    }

    Ok(ScmProblem {
        target_id: target.clone(),
        donor_pool: pool.clone(),
        outcome,
        intervention_year,
        validation_seasons: pre_seasons.clone(),
        pre_seasons,
        post_seasons,
        covariate_rows: rows,
        target_outcomes,
        donor_outcomes,
    })
}

/// Solver settings for both optimization levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub inner: InnerConfig,
    /// Nelder-Mead evaluation budget per start.
    pub outer_max_evals: usize,
    /// Stop when the MSPE spread across the search simplex falls below this.
    pub outer_tol: f64,
    /// 1: uniform start only; 2: also the inverse-variance start.
    pub multistart: usize,
    /// Initial simplex edge in log-weight space.
    pub initial_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { inner: InnerConfig::default(), outer_max_evals: 1500, outer_tol: 1e-12, multistart: 2, initial_step: 1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, value: String| Err(Error::InvariantViolation { field: format!("solver.{field}"), value });
        if self.inner.max_iter == 0 {
            return bad("max_iter", "0".into());
        }
        if self.inner.tol.is_nan() || self.inner.tol <= 0.0 {
            return bad("tol", self.inner.tol.to_string());
        }
        if self.outer_max_evals == 0 {
            return bad("outer_max_evals", "0".into());
        }
        if self.outer_tol.is_nan() || self.outer_tol < 0.0 {
            return bad("outer_tol", self.outer_tol.to_string());
        }
        if !(1..=2).contains(&self.multistart) {
            return bad("multistart", self.multistart.to_string());
        }
        if self.initial_step.is_nan() || self.initial_step <= 0.0 {
            return bad("initial_step", self.initial_step.to_string());
        }
        Ok(())
    }
}

/// Donor weights minimizing `sum_k v_k ((t_k - sum_j w_j d_jk) / s_k)^2`
/// over the simplex, and that minimum.
pub fn fit_donor_weights(problem: &ScmProblem, v: &[f64], cfg: &InnerConfig) -> Result<(Vec<f64>, f64)> {
    let rows = &problem.covariate_rows;
    if v.len() != rows.len() {
        return Err(Error::SeriesMismatch(format!("{} importance weights for {} covariate rows", v.len(), rows.len())));
    }
    let k = rows.len();
    let n = problem.donor_count();
    let mut data = vec![0.0; n * k];
    for (r, (row, &vr)) in rows.iter().zip(v).enumerate() {
        let factor = vr.max(0.0).sqrt() / row.scale;
        for (j, d) in row.donors.iter().enumerate() {
            data[j * k + r] = factor * (d - row.target);
        }
    }
    let solution = simplex::solve(simplex::Points::new(&data, k), cfg)?;
    Ok((clean_simplex(solution.weights), solution.objective))
}

/// Clamp round-off negatives and renormalize.
fn clean_simplex(mut w: Vec<f64>) -> Vec<f64> {
    for x in &mut w {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        for x in &mut w {
            *x /= total;
        }
    }
    w
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Log-weights proportional to the inverse variance of each raw row.
fn inverse_variance_start(problem: &ScmProblem) -> Vec<f64> {
    let inv: Vec<f64> = problem
        .covariate_rows
        .iter()
        .map(|r| {
            let var = sample_sd(&r.donors).map(|s| s * s).filter(|v| v.is_finite() && *v > 1e-24).unwrap_or(1.0);
            1.0 / var
        })
        .collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|x| (x / total).ln()).collect()
}

/// Observed and synthetic outcome in one season.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub season: Season,
    pub observed: f64,
    pub synthetic: f64,
}

impl TrajectoryPoint {
    pub fn gap(&self) -> f64 {
        self.observed - self.synthetic
    }
}

/// A fitted synthetic control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmFit {
    pub target_id: PlayerId,
    pub outcome: Outcome,
    pub intervention_year: Season,
    pub effect_kind: EffectKind,
    pub donor_ids: Vec<PlayerId>,
    pub donor_weights: Vec<f64>,
    pub covariate_labels: Vec<String>,
    pub importance_weights: Vec<f64>,
    pub pre_seasons: SeasonSet,
    pub post_seasons: SeasonSet,
    /// Pre and post seasons in order.
    pub trajectory: Vec<TrajectoryPoint>,
    pub pre_rmspe: f64,
    pub inner_objective: f64,
    pub post_effects: Vec<EffectEstimate>,
    pub outer_evaluations: usize,
}

impl ScmFit {
    pub fn point(&self, season: Season) -> Option<&TrajectoryPoint> {
        self.trajectory.iter().find(|p| p.season == season)
    }

    pub fn synthetic(&self) -> BTreeMap<Season, f64> {
        self.trajectory.iter().map(|p| (p.season, p.synthetic)).collect()
    }

    pub fn observed(&self) -> BTreeMap<Season, f64> {
        self.trajectory.iter().map(|p| (p.season, p.observed)).collect()
    }

    /// Effect in a post season.
    pub fn effect(&self, year: Season) -> Option<f64> {
        self.post_effects.iter().find(|e| e.year == year).map(|e| e.estimate)
    }

    /// Effect at the intervention year.
    pub fn headline_effect(&self) -> f64 {
        self.effect(self.intervention_year).expect("fits always cover the intervention year")
    }

    pub fn weight_of(&self, donor: &PlayerId) -> Option<f64> {
        self.donor_ids.iter().position(|d| d == donor).map(|i| self.donor_weights[i])
    }

    /// Donors by descending weight, ties by id.
    pub fn ranked_donors(&self) -> Vec<(PlayerId, f64)> {
        let mut ranked: Vec<_> = self.donor_ids.iter().cloned().zip(self.donor_weights.iter().copied()).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    /// Re-tag the effects, e.g. when a control is run as a placebo target.
    pub fn relabel(mut self, kind: EffectKind) -> Result<Self> {
        self.effect_kind = kind;
        self.post_effects = self
            .post_effects
            .into_iter()
            .map(|e| EffectEstimate::new(e.outcome, e.unit, e.year, e.estimate, kind))
            .collect::<Result<_>>()?;
        Ok(self)
    }
}

/// Choose importance weights minimizing pre-period outcome MSPE, then fit
/// donor weights and project the counterfactual.
pub fn optimize_importance_weights(problem: &ScmProblem, cfg: &SolverConfig) -> Result<ScmFit> {
    cfg.validate()?;
    let k = problem.covariate_rows.len();
    let (v, w, inner_objective, evaluations) = if problem.donor_count() == 1 {
        (vec![1.0 / k as f64; k], vec![1.0], fit_donor_weights(problem, &vec![1.0 / k as f64; k], &cfg.inner)?.1, 0)
    } else {
        let mut starts = vec![vec![0.0; k]];
        if cfg.multistart >= 2 {
            starts.push(inverse_variance_start(problem));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut evaluations = 0;
        for start in starts {
            let result = nelder_mead::minimize(
                |theta| {
                    let (w, _) = fit_donor_weights(problem, &softmax(theta), &cfg.inner)?;
                    problem.validation_mspe(&w)
                },
                &start,
                cfg.initial_step,
                cfg.outer_max_evals,
                cfg.outer_tol,
            )?;
            evaluations += result.evaluations;
            if best.as_ref().is_none_or(|(value, _)| result.value < *value) {
                best = Some((result.value, result.x));
            }
        }
        let (_, theta) = best.expect("at least one start");
        let v = softmax(&theta);
        let (w, objective) = fit_donor_weights(problem, &v, &cfg.inner)?;
        (v, w, objective, evaluations)
    };
    build_fit(problem, v, w, inner_objective, evaluations)
}

fn build_fit(problem: &ScmProblem, v: Vec<f64>, w: Vec<f64>, inner_objective: f64, outer_evaluations: usize) -> Result<ScmFit> {
    let mut trajectory = Vec::new();
    for (&season, &observed) in &problem.target_outcomes {
        trajectory.push(TrajectoryPoint { season, observed, synthetic: problem.synthetic(season, &w)? });
    }
    let fit_pre = |p: &&TrajectoryPoint| problem.validation_seasons.contains(&p.season);
    let pre_errors: Vec<f64> = trajectory.iter().filter(fit_pre).map(|p| p.gap().powi(2)).collect();
    let pre_rmspe = (pre_errors.iter().sum::<f64>() / pre_errors.len() as f64).sqrt();

    let mut fit = ScmFit {
        target_id: problem.target_id.clone(),
        outcome: problem.outcome,
        intervention_year: problem.intervention_year,
        effect_kind: problem.default_kind(),
        donor_ids: problem.donor_pool.donor_ids.clone(),
        donor_weights: w,
        covariate_labels: problem.labels(),
        importance_weights: v,
        pre_seasons: problem.pre_seasons.clone(),
        post_seasons: problem.post_seasons.clone(),
        trajectory,
        pre_rmspe,
        inner_objective,
        post_effects: Vec::new(),
        outer_evaluations,
    };
    let observed = fit.observed();
    fit.post_effects = estimate_effect(&fit, &observed, &problem.post_seasons)?;
    Ok(fit)
}

/// Observed minus synthetic in each requested year.
pub fn estimate_effect(fit: &ScmFit, observed: &BTreeMap<Season, f64>, years: &SeasonSet) -> Result<Vec<EffectEstimate>> {
    years
        .iter()
        .map(|&year| {
            let obs = observed
                .get(&year)
                .ok_or_else(|| Error::MissingSeason { population: fit.target_id.to_string(), season: year })?;
            let synthetic = fit
                .point(year)
                .ok_or_else(|| Error::MissingSeason { population: "synthetic control".into(), season: year })?
                .synthetic;
            EffectEstimate::new(fit.outcome, EffectUnit::Player(fit.target_id.clone()), year, obs - synthetic, fit.effect_kind)
        })
        .collect()
}

/// Build the pool, assemble and fit one target.
pub fn fit_target(
    target: &PlayerId,
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    design: &FitDesign,
    min_pa: u32,
    cfg: &SolverConfig,
) -> Result<ScmFit> {
    let pool = design.donor_pool(target, controls, panel, min_pa)?;
    let problem = assemble_problem(target, &pool, outcome, panel, design.intervention_year)?;
    optimize_importance_weights(&problem, cfg)
}

/// Fit many targets in parallel; results come back in input order.
pub fn fit_targets(
    targets: &[PlayerId],
    controls: &[PlayerId],
    panel: &PanelDataset,
    outcome: Outcome,
    design: &FitDesign,
    min_pa: u32,
    cfg: &SolverConfig,
) -> Vec<Result<ScmFit>> {
    targets.par_iter().map(|t| fit_target(t, controls, panel, outcome, design, min_pa, cfg)).collect()
}

/// Player gate for the 2024 extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionGate {
    /// Eligible in every season 2021 through 2024.
    Full,
    /// Eligible in 2021, 2022 and 2024; 2023 playing time is not required.
    Only2024,
}

impl ExtensionGate {
    pub fn cohort_gate(self, min_pa: u32) -> CohortGate {
        let years: &[u16] = match self {
            ExtensionGate::Full => &[2021, 2022, 2023, 2024],
            ExtensionGate::Only2024 => &[2021, 2022, 2024],
        };
        CohortGate { seasons: years.iter().map(|&y| Season::new(y).unwrap()).collect(), min_pa }
    }
}

/// Targets and controls re-rated under an extension gate.
pub fn extension_cohorts(
    shift_rates: &ShiftRates,
    panel: &PanelDataset,
    gate: ExtensionGate,
    bounds: &CohortBounds,
    min_pa: u32,
) -> Result<(Vec<PlayerId>, Vec<PlayerId>)> {
    let cohorts = build_cohorts(shift_rates, panel, &gate.cohort_gate(min_pa), bounds)?;
    Ok((cohort_members(&cohorts, Cohort::High), cohort_members(&cohorts, Cohort::Low)))
}

/// Refit every extension target with effects for 2023 and 2024.
///
/// Players without a qualifying 2024 season drop out through the gate.
/// The donor pool is recomputed, so 2023 estimates may differ from the
/// main analysis.
pub fn refit_2024(
    shift_rates: &ShiftRates,
    panel: &PanelDataset,
    outcome: Outcome,
    gate: ExtensionGate,
    bounds: &CohortBounds,
    min_pa: u32,
    cfg: &SolverConfig,
) -> Result<Vec<Result<ScmFit>>> {
    let (targets, controls) = extension_cohorts(shift_rates, panel, gate, bounds, min_pa)?;
    Ok(fit_targets(&targets, &controls, panel, outcome, &FitDesign::extension(), min_pa, cfg))
}
