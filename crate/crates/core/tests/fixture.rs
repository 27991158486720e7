use std::path::PathBuf;

use panelcause_core::inference::run_in_space_placebos;
use panelcause_core::ingest::{build_cohorts, cohort_members, load_player_seasons, load_shift_rates, CohortGate};
use panelcause_core::scm::{assemble_problem, fit_target, FitDesign, SolverConfig};
use panelcause_core::{Cohort, CohortBounds, Outcome, PanelDataset, PlayerId, Season, ShiftCohort};

fn data(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture").join(file)
}

fn load() -> (PanelDataset, Vec<ShiftCohort>) {
    let panel = load_player_seasons(data("player_seasons.csv")).unwrap();
    let rates = load_shift_rates(data("shift_rates.csv")).unwrap();
    let cohorts = build_cohorts(&rates, &panel, &CohortGate::main(250), &CohortBounds::default()).unwrap();
    (panel, cohorts)
}

fn seager() -> PlayerId {
    PlayerId::new("corey-seager")
}

#[test]
fn seager_main_rows() {
    let (panel, cohorts) = load();
    let controls = cohort_members(&cohorts, Cohort::Low);
    let design = FitDesign::main();
    let pool = design.donor_pool(&seager(), &controls, &panel, 250).unwrap();
    let problem = assemble_problem(&seager(), &pool, Outcome::Obp, &panel, Season::BAN).unwrap();
    // Five eligible pre seasons (2015 and 2018 are under 250 PA), age, and
    // six stats each with 2022, 2021 and a pre-2020 mean.
    let years: Vec<u16> = problem.pre_seasons.iter().map(|s| s.year()).collect();
    assert_eq!(years, vec![2016, 2017, 2019, 2021, 2022]);
    assert_eq!(problem.covariate_rows.len(), 5 + 1 + 6 * 3);
    let labels = problem.labels();
    assert_eq!(&labels[..6], ["obp_2016", "obp_2017", "obp_2019", "obp_2021", "obp_2022", "age_2022"]);
    assert_eq!(&labels[6..9], ["pa_2022", "pa_2021", "pa_pre2020"]);
    assert!(problem.post_seasons.iter().all(|s| *s == Season::BAN));
    for row in &problem.covariate_rows {
        assert_eq!(row.donors.len(), pool.donor_ids.len());
        assert!(row.scale > 0.0);
    }
}

#[test]
fn in_time_rows_never_touch_2022() {
    let (panel, cohorts) = load();
    let controls = cohort_members(&cohorts, Cohort::Low);
    let design = FitDesign::in_time();
    let pool = design.donor_pool(&seager(), &controls, &panel, 250).unwrap();
    let problem = assemble_problem(&seager(), &pool, Outcome::Obp, &panel, design.intervention_year).unwrap();
    assert_eq!(problem.covariate_rows.len(), 4 + 1 + 6 * 2);
    assert!(problem.labels().iter().all(|l| !l.contains("2022")), "{:?}", problem.labels());
    assert!(problem.labels().contains(&"age_2021".to_string()));
    assert!(problem.validation_seasons.iter().all(|s| s.year() < 2022));
}

#[test]
fn donor_pool_requires_target_seasons() {
    let (panel, cohorts) = load();
    let controls = cohort_members(&cohorts, Cohort::Low);
    let design = FitDesign::main();
    let pool = design.donor_pool(&seager(), &controls, &panel, 250).unwrap();
    assert!(!pool.donor_ids.is_empty() && pool.donor_ids.len() <= controls.len());
    for d in &pool.donor_ids {
        assert!(controls.contains(d));
        assert!(panel.covers(d, &pool.required_seasons, 250));
    }
}

#[test]
fn fit_weights_are_feasible_and_synthetic_interpolates() {
    let (panel, cohorts) = load();
    let controls = cohort_members(&cohorts, Cohort::Low);
    let fit = fit_target(&seager(), &controls, &panel, Outcome::Obp, &FitDesign::main(), 250, &SolverConfig::default()).unwrap();
    assert!(fit.donor_weights.iter().all(|w| *w >= 0.0));
    assert!((fit.donor_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!((fit.importance_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    for p in &fit.trajectory {
        let vals: Vec<f64> = fit.donor_ids.iter().map(|d| panel.get(d, p.season).unwrap().obp).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(p.synthetic >= lo - 1e-12 && p.synthetic <= hi + 1e-12);
    }
    assert!(fit.headline_effect() > 0.0);
}

#[test]
fn placebo_leaves_itself_out() {
    let (panel, cohorts) = load();
    let controls: Vec<PlayerId> = cohort_members(&cohorts, Cohort::Low).into_iter().take(6).collect();
    let run = run_in_space_placebos(&controls, &panel, Outcome::Obp, 250, &SolverConfig::default());
    assert_eq!(run.distribution.entries.len(), 6);
    for fit in &run.fits {
        assert!(!fit.donor_ids.contains(&fit.target_id));
        assert!(fit.donor_ids.iter().all(|d| controls.contains(d)));
    }
}
