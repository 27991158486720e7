use std::path::{Path, PathBuf};
use std::process::Command;

use panelcause_cli::config::{Analyses, RunConfig};
use panelcause_cli::error::{error_report, CliError};
use panelcause_cli::pipeline::run;
use panelcause_cli::report::{build_bundle, figure_rows};
use proptest::prelude::*;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture")
}

fn config() -> RunConfig {
    RunConfig { data_dir: fixture_dir(), ..RunConfig::default() }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_panelcause"))
}

#[test]
fn shipped_config_parses_to_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../run.cfg");
    let loaded = RunConfig::load(&path).unwrap();
    assert_eq!(RunConfig { data_dir: RunConfig::default().data_dir, ..loaded.clone() }, RunConfig::default());
    assert!(loaded.league_path().exists());
}

#[test]
fn did_only_run_fits_nothing() {
    let analyses = Analyses { did: true, ..Analyses::none() };
    let results = run(&config(), &analyses).unwrap();
    assert!(results.main.is_none() && results.placebos.is_none() && results.in_time.is_none());
    assert!(results.panel.is_none(), "player data is not loaded for DID");
    let bundle = build_bundle(&results).unwrap();
    assert!(bundle.keys().all(|k| !k.starts_with("fits_")));
    assert!(bundle.contains_key("did_series.csv") && bundle.contains_key("figures/fig1.csv"));
    assert!(!bundle.contains_key("figures/fig2.csv"));
    let did = results.did.unwrap();
    let babip = did.iter().find(|d| d.outcome == panelcause_core::Outcome::Babip).unwrap();
    let att = babip.at(panelcause_core::Season::BAN).unwrap();
    assert!((att.did_estimate - 0.009).abs() < 1e-9);
    assert!(bundle["summary.txt"].contains("parallel trends"));
}

#[test]
fn figure_needing_missing_analysis_is_an_error() {
    let analyses = Analyses { did: true, ..Analyses::none() };
    let results = run(&config(), &analyses).unwrap();
    assert!(matches!(figure_rows(&results, "fig3"), Err(CliError::AnalysisNotRun(_))));
    assert!(matches!(figure_rows(&results, "fig7"), Err(CliError::AnalysisNotRun(_))));
    let fig1 = figure_rows(&results, "fig1").unwrap();
    assert!(fig1.iter().any(|r| r.series == "obp_counterfactual"));
}

#[test]
fn missing_inputs_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { data_dir: dir.path().to_path_buf(), ..RunConfig::default() };
    let errors = run(&cfg, &Analyses::default()).err().unwrap();
    assert_eq!(errors.len(), 3);
    let json: serde_json::Value = serde_json::from_str(&error_report(&errors)).unwrap();
    assert_eq!(json["status"], "error");
    assert!(json["errors"].as_array().unwrap().iter().all(|e| e["kind"] == "io" && e["path"].is_string()));
}

#[test]
fn malformed_player_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["league_splits.csv", "shift_rates.csv"] {
        std::fs::copy(fixture_dir().join(f), dir.path().join(f)).unwrap();
    }
    std::fs::write(dir.path().join("player_seasons.csv"), "player_id,name\nx,y\n").unwrap();
    let cfg = RunConfig { data_dir: dir.path().to_path_buf(), ..RunConfig::default() };
    let errors = run(&cfg, &Analyses { scm: true, ..Analyses::none() }).err().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].kind(), "schema");
}

#[test]
fn binary_did_subcommand_writes_bundle() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.cfg");
    std::fs::write(&cfg, format!("data_dir = {:?}\n", fixture_dir().display().to_string())).unwrap();
    let status = bin().args(["did", "--config"]).arg(&cfg).arg("--out-dir").arg(out.path().join("r")).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["analyses"], serde_json::json!(["did"]));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["files"]["table1.csv"].is_string());
}

#[test]
fn binary_errors_are_json_with_nonzero_exit() {
    let out = bin().args(["run", "--config", "/nonexistent/run.cfg"]).output().unwrap();
    assert!(!out.status.success());
    let json: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(json["errors"][0]["kind"], "io");

    let out = bin().args(["--analyses", "did,bogus", "run"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_analysis"));
}

#[test]
fn scm_subcommand_prints_one_fit_per_outcome() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.cfg");
    std::fs::write(&cfg, format!("data_dir = {:?}\n", fixture_dir().display().to_string())).unwrap();
    let res = bin().args(["scm", "--target", "kyle-tucker", "--config"]).arg(&cfg).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let fits: Vec<serde_json::Value> = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(fits.len(), 3);
    for f in &fits {
        let total: f64 = f["donor_weights"].as_array().unwrap().iter().map(|d| d["weight"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analyses_list_round_trips(flags in proptest::collection::vec(any::<bool>(), 8)) {
        let names: Vec<&str> = panelcause_cli::config::ANALYSIS_NAMES
            .iter()
            .zip(&flags)
            .filter(|(_, f)| **f)
            .map(|(n, _)| *n)
            .collect();
        let parsed = Analyses::parse_list(&names.join(",")).unwrap();
        prop_assert_eq!(parsed.enabled(), names);
    }

    #[test]
    fn out_of_range_intervention_year_rejected(year in prop_oneof![2015u16..=2021, 2025u16..=2030]) {
        prop_assume!(year != 2020);
        let text = format!("intervention_year = {year}\n");
        prop_assert!(RunConfig::parse(&text, Path::new("x")).is_err());
    }
}
