//! Orchestration: load inputs, run the enabled analyses, keep every result
//! in memory for the report writer.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use panelcause_core::did::{did_series, rescale_att, DidResult};
use panelcause_core::inference::{dose_response_fit, run_placebo_fits, DoseResponse, PlaceboRun};
use panelcause_core::ingest::{
    build_cohorts, cohort_members, find_series, load_league_splits, load_player_seasons, load_shift_rates,
    CohortGate, ShiftRates,
};
use panelcause_core::scm::{extension_cohorts, fit_targets, ExtensionGate, FitDesign, ScmFit};
use panelcause_core::{
    Cohort, EffectEstimate, EffectKind, Error, LeagueSplitSeries, Outcome, PanelDataset, PlayerId, Population, Season,
    ShiftCohort,
};
use sha2::{Digest, Sha256};

use crate::config::{Analyses, RunConfig};
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(sha256_hex(&bytes))
}

/// Parsed inputs with their content hashes.
pub struct Inputs {
    pub league: Option<Vec<LeagueSplitSeries>>,
    pub panel: Option<PanelDataset>,
    pub shift_rates: Option<ShiftRates>,
    /// File name to sha256.
    pub hashes: BTreeMap<String, String>,
}

impl Inputs {
    /// Load only the files the enabled analyses need. Every problem found
    /// is returned, not just the first.
    pub fn load(config: &RunConfig, analyses: &Analyses) -> Result<Self, Vec<CliError>> {
        let mut errors = Vec::new();
        let mut hashes = BTreeMap::new();
        let mut note = |file: &str, path: &Path, errors: &mut Vec<CliError>| match hash_file(path) {
            Ok(h) => {
                hashes.insert(file.to_string(), h);
            }
            Err(e) => errors.push(e),
        };

        let mut league = None;
        if analyses.did {
            let path = config.league_path();
            note(&config.league_file, &path, &mut errors);
            match load_league_splits(&path) {
                Ok(l) => league = Some(l),
                Err(Error::Io { .. }) => {}
                Err(e) => errors.push(e.into()),
            }
        }
        let (mut panel, mut shift_rates) = (None, None);
        if analyses.needs_players() {
            let path = config.player_path();
            note(&config.player_file, &path, &mut errors);
            match load_player_seasons(&path) {
                Ok(p) => panel = Some(p),
                Err(Error::Io { .. }) => {}
                Err(e) => errors.push(e.into()),
            }
            let path = config.shift_path();
            note(&config.shift_file, &path, &mut errors);
            match load_shift_rates(&path) {
                Ok(s) => shift_rates = Some(s),
                Err(Error::Io { .. }) => {}
                Err(e) => errors.push(e.into()),
            }
        }
        if errors.is_empty() {
            Ok(Self { league, panel, shift_rates, hashes })
        } else {
            Err(errors)
        }
    }
}

/// League-level DID results for one outcome.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DidOutcome {
    pub outcome: Outcome,
    pub lhb: LeagueSplitSeries,
    pub rhb: LeagueSplitSeries,
    pub series: Vec<DidResult>,
    /// ATT scaled by the LHB share of all plate appearances.
    pub rescaled_att: Option<EffectEstimate>,
    pub lhb_pa_share: Option<f64>,
}

impl DidOutcome {
    pub fn at(&self, year: Season) -> Option<&DidResult> {
        self.series.iter().find(|r| r.year == year)
    }
}

/// One target's fit, or why it failed.
#[derive(Debug, Clone)]
pub struct TargetFit {
    pub player_id: PlayerId,
    pub fit: Result<ScmFit, String>,
}

impl TargetFit {
    fn collect(targets: &[PlayerId], fits: Vec<panelcause_core::Result<ScmFit>>) -> Vec<Self> {
        targets
            .iter()
            .cloned()
            .zip(fits)
            .map(|(player_id, fit)| Self { player_id, fit: fit.map_err(|e| e.to_string()) })
            .collect()
    }

    pub fn ok(&self) -> Option<&ScmFit> {
        self.fit.as_ref().ok()
    }
}

/// 2024 extension results for one outcome.
#[derive(Debug, Clone)]
pub struct ExtensionOutcome {
    pub targets: Vec<TargetFit>,
    pub placebos: PlaceboRun,
}

/// In-time results: targets and controls both moved to the earlier date.
#[derive(Debug, Clone)]
pub struct InTimeOutcome {
    pub targets: PlaceboRun,
    pub controls: PlaceboRun,
}

/// Everything a run produced. `None` means the analysis was not run.
pub struct RunResults {
    pub config: RunConfig,
    pub analyses: Analyses,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    pub panel: Option<PanelDataset>,
    pub cohorts: Option<Vec<ShiftCohort>>,
    pub did: Option<Vec<DidOutcome>>,
    pub main: Option<BTreeMap<Outcome, Vec<TargetFit>>>,
    pub placebos: Option<BTreeMap<Outcome, PlaceboRun>>,
    pub in_unit: Option<BTreeMap<Outcome, PlaceboRun>>,
    pub in_time: Option<BTreeMap<Outcome, InTimeOutcome>>,
    pub extension: Option<BTreeMap<Outcome, ExtensionOutcome>>,
    pub extension_only_2024: Option<BTreeMap<Outcome, Vec<TargetFit>>>,
    pub dose_response: Option<BTreeMap<Outcome, Result<DoseResponse, String>>>,
    pub extension_counts: Option<ExtensionCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ExtensionCounts {
    pub targets: usize,
    pub controls: usize,
    pub only_2024_targets: usize,
}

impl RunResults {
    pub fn cohort(&self, cohort: Cohort) -> Vec<PlayerId> {
        self.cohorts.as_deref().map(|c| cohort_members(c, cohort)).unwrap_or_default()
    }

    pub fn shift_rate(&self, player: &PlayerId) -> Option<f64> {
        self.cohorts.as_ref()?.iter().find(|c| &c.player_id == player).map(|c| c.shift_rate_2022)
    }

    pub fn name(&self, player: &PlayerId) -> String {
        self.panel.as_ref().and_then(|p| p.name(player)).unwrap_or(player.as_str()).to_string()
    }

    pub fn main_fit(&self, outcome: Outcome, player: &PlayerId) -> Option<&ScmFit> {
        self.main.as_ref()?.get(&outcome)?.iter().find(|t| &t.player_id == player)?.ok()
    }
}

/// Run the enabled analyses. Input problems are reported together.
pub fn run(config: &RunConfig, analyses: &Analyses) -> Result<RunResults, Vec<CliError>> {
    let inputs = Inputs::load(config, analyses)?;
    run_with(config, analyses, inputs).map_err(|e| vec![e])
}

fn did_analysis(config: &RunConfig, league: &[LeagueSplitSeries]) -> CliResult<Vec<DidOutcome>> {
    let mut out = Vec::new();
    for &outcome in &config.did_outcomes {
        let missing = || Error::SeriesMismatch(format!("no LHB/RHB {outcome} series in league file"));
        let lhb = find_series(league, Population::Lhb, outcome).ok_or_else(missing)?;
        let rhb = find_series(league, Population::Rhb, outcome).ok_or_else(missing)?;
        let seasons = lhb.seasons().intersection(&rhb.seasons()).copied().collect();
        let series = did_series(lhb, rhb, &seasons)?;
        let year = config.intervention_year;
        let share = lhb.pa_share.as_ref().and_then(|s| s.get(&year)).copied();
        let att = series.iter().find(|r| r.year == year && r.kind == EffectKind::Att);
        let rescaled_att = match (att, share) {
            (Some(att), Some(share)) => Some(rescale_att(&att.effect(), share)?),
            _ => None,
        };
        out.push(DidOutcome { outcome, lhb: lhb.clone(), rhb: rhb.clone(), series, rescaled_att, lhb_pa_share: share });
    }
    Ok(out)
}

pub fn run_with(config: &RunConfig, analyses: &Analyses, inputs: Inputs) -> CliResult<RunResults> {
    let Inputs { league, panel, shift_rates, hashes } = inputs;
    let mut results = RunResults {
        config: config.clone(),
        analyses: *analyses,
        config_hash: sha256_hex(config.canonical().as_bytes()),
        input_hashes: hashes,
        panel: None,
        cohorts: None,
        did: None,
        main: None,
        placebos: None,
        in_unit: None,
        in_time: None,
        extension: None,
        extension_only_2024: None,
        dose_response: None,
        extension_counts: None,
    };

    if let Some(league) = &league {
        results.did = Some(did_analysis(config, league)?);
    }
    let (Some(panel), Some(shift_rates)) = (panel, shift_rates) else {
        return Ok(results);
    };

    let min_pa = config.min_pa;
    let solver = &config.solver;
    let cohorts = build_cohorts(&shift_rates, &panel, &CohortGate::main(min_pa), &config.cohort_bounds)?;
    let targets = cohort_members(&cohorts, Cohort::High);
    let controls = cohort_members(&cohorts, Cohort::Low);
    let in_unit = cohort_members(&cohorts, Cohort::InUnitPlacebo);
    let year = config.intervention_year;
    let design = FitDesign { intervention_year: year, post_seasons: [year].into() };

    let per_outcome = |f: &dyn Fn(Outcome) -> PlaceboRun| -> BTreeMap<Outcome, PlaceboRun> {
        config.outcomes.iter().map(|&o| (o, f(o))).collect()
    };

    let need_main = analyses.scm || analyses.placebos || analyses.dose_response;
    if need_main {
        let main = config
            .outcomes
            .iter()
            .map(|&o| (o, TargetFit::collect(&targets, fit_targets(&targets, &controls, &panel, o, &design, min_pa, solver))))
            .collect();
        results.main = Some(main);
    }
    if analyses.placebos {
        results.placebos = Some(per_outcome(&|o| {
            run_placebo_fits(&controls, &controls, &panel, o, &design, EffectKind::Placebo, min_pa, solver)
        }));
    }
    if analyses.in_unit {
        results.in_unit = Some(per_outcome(&|o| {
            run_placebo_fits(&in_unit, &controls, &panel, o, &design, EffectKind::InUnitPlacebo, min_pa, solver)
        }));
    }
    if analyses.in_time {
        let early = year.previous().filter(|s| s.year() >= 2021).ok_or_else(|| CliError::Config {
            path: "intervention_year".into(),
            message: format!("no in-time placebo date before {year}"),
        })?;
        let in_time = FitDesign { intervention_year: early, post_seasons: [early].into() };
        let runs = config
            .outcomes
            .iter()
            .map(|&o| {
                let kind = EffectKind::InTimePlacebo;
                let t = run_placebo_fits(&targets, &controls, &panel, o, &in_time, kind, min_pa, solver);
                let c = run_placebo_fits(&controls, &controls, &panel, o, &in_time, kind, min_pa, solver);
                (o, InTimeOutcome { targets: t, controls: c })
            })
            .collect();
        results.in_time = Some(runs);
    }
    if analyses.extension_2024 || analyses.extension_only_2024 {
        let bounds = &config.cohort_bounds;
        let (ext_targets, ext_controls) = extension_cohorts(&shift_rates, &panel, ExtensionGate::Full, bounds, min_pa)?;
        let (only_targets, only_controls) =
            extension_cohorts(&shift_rates, &panel, ExtensionGate::Only2024, bounds, min_pa)?;
        results.extension_counts = Some(ExtensionCounts {
            targets: ext_targets.len(),
            controls: ext_controls.len(),
            only_2024_targets: only_targets.len(),
        });
        let ext = FitDesign::extension();
        if analyses.extension_2024 {
            let runs = config
                .outcomes
                .iter()
                .map(|&o| {
                    let fits = fit_targets(&ext_targets, &ext_controls, &panel, o, &ext, min_pa, solver);
                    let placebos =
                        run_placebo_fits(&ext_controls, &ext_controls, &panel, o, &ext, EffectKind::Placebo, min_pa, solver);
                    (o, ExtensionOutcome { targets: TargetFit::collect(&ext_targets, fits), placebos })
                })
                .collect();
            results.extension = Some(runs);
        }
        if analyses.extension_only_2024 {
            let runs = config
                .outcomes
                .iter()
                .map(|&o| {
                    let fits = fit_targets(&only_targets, &only_controls, &panel, o, &ext, min_pa, solver);
                    (o, TargetFit::collect(&only_targets, fits))
                })
                .collect();
            results.extension_only_2024 = Some(runs);
        }
    }
    if analyses.dose_response {
        let main = results.main.as_ref().expect("main fits run for dose response");
        let rate = |p: &PlayerId| cohorts.iter().find(|c| &c.player_id == p).map(|c| c.shift_rate_2022);
        let fits = main
            .iter()
            .map(|(&o, fits)| {
                let points: Vec<(f64, f64)> =
                    fits.iter().filter_map(|t| Some((rate(&t.player_id)?, t.ok()?.headline_effect()))).collect();
                (o, dose_response_fit(&points).map_err(|e| e.to_string()))
            })
            .collect();
        results.dose_response = Some(fits);
    }
    results.cohorts = Some(cohorts);
    results.panel = Some(panel);
    Ok(results)
}

/// Fit one player against the low-shift donor pool, for every configured
/// outcome. The player need not be in the high-shift cohort.
pub fn fit_single(config: &RunConfig, target: &PlayerId) -> Result<Vec<(Outcome, TargetFit)>, Vec<CliError>> {
    let analyses = Analyses { scm: true, ..Analyses::none() };
    let Inputs { panel, shift_rates, .. } = Inputs::load(config, &analyses)?;
    let (panel, shift_rates) = (panel.expect("player data loaded"), shift_rates.expect("shift data loaded"));
    let one = |e: Error| vec![CliError::from(e)];
    if panel.history(target).next().is_none() {
        return Err(vec![CliError::Usage(format!("no player `{target}` in {}", config.player_file))]);
    }
    let cohorts =
        build_cohorts(&shift_rates, &panel, &CohortGate::main(config.min_pa), &config.cohort_bounds).map_err(one)?;
    let controls: Vec<PlayerId> = cohort_members(&cohorts, Cohort::Low).into_iter().filter(|p| p != target).collect();
    let year = config.intervention_year;
    let design = FitDesign { intervention_year: year, post_seasons: [year].into() };
    Ok(config
        .outcomes
        .iter()
        .map(|&o| {
            let fit = fit_targets(std::slice::from_ref(target), &controls, &panel, o, &design, config.min_pa, &config.solver);
            (o, TargetFit::collect(std::slice::from_ref(target), fit).remove(0))
        })
        .collect())
}
