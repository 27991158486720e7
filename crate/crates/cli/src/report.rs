//! Report bundle: CSV tables, JSON fit dumps, figure data and a manifest.
//!
//! Output is a pure function of the run results, so identical inputs give
//! byte-identical bundles. Nothing time- or host-dependent is written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use panelcause_core::did::{DidReport, ASSUMPTIONS, REPORT_HEADER};
use panelcause_core::inference::{distribution_rows, placebo_p_value, PlaceboRun, DISTRIBUTION_HEADER, PLACEBO_CAVEAT};
use panelcause_core::scm::ScmFit;
use panelcause_core::{Cohort, Outcome, PlayerId, Population, Season};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::pipeline::{sha256_hex, RunResults, TargetFit};

/// Donor weights below this are shown as absent in human-readable tables.
pub const DISPLAY_WEIGHT_FLOOR: f64 = 0.001;

pub const SCALING_NOTE: &str = "Covariate rows are standardized by their donor-pool standard deviation before \
matching; donor weights depend on this choice.";

pub const FIGURE_IDS: [&str; 8] = ["fig1", "fig2", "fig3", "fig4", "figA1", "figA2", "figA3", "figA4"];

pub const FIGURE_HEADER: &str = "figure,series,player_or_population,season,value";

/// One long-format figure row.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub figure: String,
    pub series: String,
    pub unit: String,
    pub season: Season,
    pub value: f64,
}

fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| if f.contains([',', '"', '\n']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect();
    escaped.join(",")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn rows_to_csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    writeln!(out, "{header}").unwrap();
    for r in rows {
        writeln!(out, "{}", csv_line(&r)).unwrap();
    }
    out
}

/// Fit dump: weights at full precision with their labels.
pub fn fit_json(fit: &ScmFit) -> Value {
    json!({
        "target": fit.target_id,
        "outcome": fit.outcome,
        "intervention_year": fit.intervention_year,
        "kind": fit.effect_kind,
        "donor_weights": fit.donor_ids.iter().zip(&fit.donor_weights)
            .map(|(id, w)| json!({ "player_id": id, "weight": w })).collect::<Vec<_>>(),
        "importance_weights": fit.covariate_labels.iter().zip(&fit.importance_weights)
            .map(|(label, v)| json!({ "label": label, "weight": v })).collect::<Vec<_>>(),
        "trajectory": fit.trajectory,
        "pre_seasons": fit.pre_seasons,
        "post_seasons": fit.post_seasons,
        "pre_rmspe": fit.pre_rmspe,
        "inner_objective": fit.inner_objective,
        "outer_evaluations": fit.outer_evaluations,
        "effects": fit.post_effects.iter().map(|e| json!({ "year": e.year, "estimate": e.estimate })).collect::<Vec<_>>(),
    })
}

fn target_fits_json(outcome: Outcome, fits: &[TargetFit]) -> Vec<Value> {
    fits.iter()
        .map(|t| match &t.fit {
            Ok(fit) => fit_json(fit),
            Err(e) => json!({ "target": t.player_id, "outcome": outcome, "error": e }),
        })
        .collect()
}

fn placebo_fits_json(run: &PlaceboRun) -> Vec<Value> {
    let mut out: Vec<Value> = run.fits.iter().map(fit_json).collect();
    for e in run.distribution.entries.iter().filter(|e| e.estimate.is_none()) {
        out.push(json!({ "target": e.player_id, "outcome": run.distribution.outcome, "error": e.failure }));
    }
    out
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn gap_rows(figure: &str, series: &str, fit: &ScmFit) -> Vec<FigureRow> {
    fit.trajectory
        .iter()
        .map(|p| FigureRow {
            figure: figure.into(),
            series: series.into(),
            unit: fit.target_id.to_string(),
            season: p.season,
            value: p.gap(),
        })
        .collect()
}

fn trajectory_rows(figure: &str, fit: &ScmFit) -> Vec<FigureRow> {
    let mut rows = Vec::new();
    for p in &fit.trajectory {
        for (kind, value) in [("observed", p.observed), ("synthetic", p.synthetic)] {
            rows.push(FigureRow {
                figure: figure.into(),
                series: format!("{}_{kind}", fit.outcome.label()),
                unit: fit.target_id.to_string(),
                season: p.season,
                value,
            });
        }
    }
    rows
}

fn not_run(id: &str) -> CliError {
    CliError::AnalysisNotRun(id.to_string())
}

/// Long-format rows for one figure.
pub fn figure_rows(results: &RunResults, id: &str) -> CliResult<Vec<FigureRow>> {
    let mut rows = Vec::new();
    let outcomes = &results.config.outcomes;
    let featured = &results.config.featured_player;
    match id {
        "fig1" => {
            let did = results.did.as_ref().ok_or_else(|| not_run(id))?;
            let year = results.config.intervention_year;
            for outcome in [Outcome::Babip, Outcome::Obp] {
                let d = did.iter().find(|d| d.outcome == outcome).ok_or_else(|| not_run(id))?;
                let series = format!("{}_trend", outcome.label());
                for (pop, s) in [(Population::Lhb, &d.lhb), (Population::Rhb, &d.rhb)] {
                    for (&season, &value) in s.values.range(..=year) {
                        rows.push(FigureRow { figure: id.into(), series: series.clone(), unit: pop.to_string(), season, value });
                    }
                }
                if let Some(att) = d.at(year) {
                    rows.push(FigureRow {
                        figure: id.into(),
                        series: format!("{}_counterfactual", outcome.label()),
                        unit: Population::Lhb.to_string(),
                        season: year,
                        value: att.counterfactual_post_lhb,
                    });
                }
                for r in d.series.iter().filter(|r| r.year <= year) {
                    rows.push(FigureRow {
                        figure: id.into(),
                        series: format!("{}_did", outcome.label()),
                        unit: "LHB-RHB".into(),
                        season: r.year,
                        value: r.did_estimate,
                    });
                }
            }
        }
        "fig2" => {
            results.main.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                let fit = results.main_fit(o, featured).ok_or_else(|| not_run(id))?;
                rows.extend(trajectory_rows(id, fit));
            }
        }
        "fig3" => {
            let main = results.main.as_ref().ok_or_else(|| not_run(id))?;
            let placebos = results.placebos.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                for fit in main[&o].iter().filter_map(TargetFit::ok) {
                    rows.extend(gap_rows(id, &format!("{}_target", o.label()), fit));
                }
                for fit in &placebos[&o].fits {
                    rows.extend(gap_rows(id, &format!("{}_placebo", o.label()), fit));
                }
            }
        }
        "fig4" => {
            let dose = results.dose_response.as_ref().ok_or_else(|| not_run(id))?;
            let main = results.main.as_ref().ok_or_else(|| not_run(id))?;
            let year = results.config.intervention_year;
            for &o in outcomes {
                let line = dose[&o].as_ref().ok();
                for fit in main[&o].iter().filter_map(TargetFit::ok) {
                    let Some(rate) = results.shift_rate(&fit.target_id) else { continue };
                    let row = |series: &str, value: f64| FigureRow {
                        figure: id.into(),
                        series: format!("{}_{series}", o.label()),
                        unit: fit.target_id.to_string(),
                        season: year,
                        value,
                    };
                    rows.push(row("shift_rate", rate));
                    rows.push(row("effect", fit.headline_effect()));
                    if let Some(line) = line {
                        rows.push(row("ols_fitted", line.predict(rate)));
                    }
                }
                if let Some(line) = line {
                    for (series, value) in [("ols_slope", line.slope), ("ols_intercept", line.intercept)] {
                        rows.push(FigureRow {
                            figure: id.into(),
                            series: format!("{}_{series}", o.label()),
                            unit: "all".into(),
                            season: year,
                            value,
                        });
                    }
                }
            }
        }
        "figA1" => {
            let ext = results.extension.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                let fit = ext[&o].targets.iter().find(|t| &t.player_id == featured).and_then(TargetFit::ok);
                rows.extend(trajectory_rows(id, fit.ok_or_else(|| not_run(id))?));
            }
        }
        "figA2" => {
            let ext = results.extension.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                for fit in ext[&o].targets.iter().filter_map(TargetFit::ok) {
                    rows.extend(gap_rows(id, &format!("{}_target", o.label()), fit));
                }
                for fit in &ext[&o].placebos.fits {
                    rows.extend(gap_rows(id, &format!("{}_placebo", o.label()), fit));
                }
            }
        }
        "figA3" => {
            let in_unit = results.in_unit.as_ref().ok_or_else(|| not_run(id))?;
            let placebos = results.placebos.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                for fit in &in_unit[&o].fits {
                    rows.extend(gap_rows(id, &format!("{}_in_unit", o.label()), fit));
                }
                for fit in &placebos[&o].fits {
                    rows.extend(gap_rows(id, &format!("{}_placebo", o.label()), fit));
                }
            }
        }
        "figA4" => {
            let in_time = results.in_time.as_ref().ok_or_else(|| not_run(id))?;
            for &o in outcomes {
                for fit in &in_time[&o].targets.fits {
                    rows.extend(gap_rows(id, &format!("{}_target", o.label()), fit));
                }
                for fit in &in_time[&o].controls.fits {
                    rows.extend(gap_rows(id, &format!("{}_placebo", o.label()), fit));
                }
            }
        }
        _ => return Err(not_run(id)),
    }
    Ok(rows)
}

pub fn figure_csv(rows: &[FigureRow]) -> String {
    rows_to_csv(
        FIGURE_HEADER,
        rows.iter().map(|r| vec![r.figure.clone(), r.series.clone(), r.unit.clone(), r.season.to_string(), r.value.to_string()]),
    )
}

/// Ordered map of relative path to file contents.
pub type Bundle = BTreeMap<String, String>;

fn table3(results: &RunResults) -> Option<String> {
    let main = results.main.as_ref()?;
    let outcomes = &results.config.outcomes;
    let mut header = vec!["player_id".to_string(), "name".into(), "shift_rate_2022".into()];
    for o in outcomes {
        header.push(format!("{}_estimate", o.label()));
        header.push(format!("{}_p_value", o.label()));
    }
    let mut targets = results.cohort(Cohort::High);
    let rate = |p: &PlayerId| results.shift_rate(p).unwrap_or(f64::NAN);
    targets.sort_by(|a, b| rate(b).total_cmp(&rate(a)).then_with(|| a.cmp(b)));
    let rows = targets.iter().map(|p| {
        let mut row = vec![p.to_string(), results.name(p), rate(p).to_string()];
        for o in outcomes {
            let est = main[o].iter().find(|t| &t.player_id == p).and_then(TargetFit::ok).map(ScmFit::headline_effect);
            let p_value = match (est, results.placebos.as_ref()) {
                (Some(e), Some(pl)) => placebo_p_value(e, &pl[o].distribution).ok(),
                _ => None,
            };
            row.push(opt(est));
            row.push(opt(p_value));
        }
        row
    });
    Some(rows_to_csv(&header.join(","), rows))
}

fn table2(results: &RunResults) -> Option<String> {
    let featured = &results.config.featured_player;
    let mut rows = Vec::new();
    for &o in &results.config.outcomes {
        let Some(fit) = results.main_fit(o, featured) else { continue };
        let shown = fit.ranked_donors().into_iter().filter(|(_, w)| *w >= DISPLAY_WEIGHT_FLOOR);
        for (rank, (id, w)) in shown.enumerate() {
            rows.push(vec![o.label().into(), (rank + 1).to_string(), id.to_string(), results.name(&id), w.to_string()]);
        }
    }
    results.main.as_ref()?;
    Some(rows_to_csv("outcome,rank,player_id,name,weight", rows))
}

fn table1(results: &RunResults) -> Option<String> {
    let year = results.config.intervention_year;
    let mut rows = Vec::new();
    for d in results.did.as_ref()? {
        let Some(r) = d.at(year) else { continue };
        let o = d.outcome.label().to_string();
        let line = |row: &str, pre: f64, post: f64, diff: f64| {
            vec![o.clone(), row.into(), r.pre_year.to_string(), r.year.to_string(), pre.to_string(), post.to_string(), diff.to_string()]
        };
        rows.push(line("LHB", r.lhb_pre, r.lhb_post, r.lhb_diff));
        rows.push(line("RHB", r.rhb_pre, r.rhb_post, r.rhb_diff));
        rows.push(line("Difference", r.lhb_pre - r.rhb_pre, r.lhb_post - r.rhb_post, r.did_estimate));
    }
    Some(rows_to_csv("outcome,row,pre_year,post_year,pre,post,difference", rows))
}

fn distribution_csv(run: &PlaceboRun, targets: &[ScmFit]) -> CliResult<String> {
    let rows = distribution_rows(&run.distribution, targets)?;
    Ok(rows_to_csv(DISTRIBUTION_HEADER, rows.iter().map(|r| r.csv_fields().to_vec())))
}

fn did_files(results: &RunResults, bundle: &mut Bundle) -> CliResult<()> {
    let Some(did) = &results.did else { return Ok(()) };
    let mut csv = String::new();
    writeln!(csv, "{REPORT_HEADER}").unwrap();
    for d in did {
        let body = DidReport::new(&d.series).to_csv()?;
        csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
    }
    bundle.insert("did_series.csv".into(), csv);
    let json = json!({
        "caveats": ASSUMPTIONS,
        "outcomes": did.iter().map(|d| json!({
            "outcome": d.outcome,
            "series": d.series,
            "lhb_pa_share": d.lhb_pa_share,
            "rescaled_att": d.rescaled_att,
        })).collect::<Vec<_>>(),
    });
    bundle.insert("did.json".into(), pretty(&json));
    if let Some(t1) = table1(results) {
        bundle.insert("table1.csv".into(), t1);
    }
    Ok(())
}

fn scm_files(results: &RunResults, bundle: &mut Bundle) -> CliResult<()> {
    if let Some(cohorts) = &results.cohorts {
        let rows = cohorts.iter().map(|c| {
            vec![c.player_id.to_string(), results.name(&c.player_id), c.shift_rate_2022.to_string(), format!("{:?}", c.cohort)]
        });
        bundle.insert("cohorts.csv".into(), rows_to_csv("player_id,name,shift_rate_2022,cohort", rows));
    }
    if let Some(main) = &results.main {
        let all: Vec<Value> = main.iter().flat_map(|(&o, fits)| target_fits_json(o, fits)).collect();
        bundle.insert("fits_main.json".into(), pretty(&Value::Array(all)));
        if let Some(t) = table2(results) {
            bundle.insert("table2.csv".into(), t);
        }
        if let Some(t) = table3(results) {
            bundle.insert("table3.csv".into(), t);
        }
    }
    let ok_fits = |fits: &[TargetFit]| -> Vec<ScmFit> { fits.iter().filter_map(TargetFit::ok).cloned().collect() };
    if let Some(placebos) = &results.placebos {
        let mut dumps = Vec::new();
        for (o, run) in placebos {
            let targets = results.main.as_ref().map(|m| ok_fits(&m[o])).unwrap_or_default();
            bundle.insert(format!("placebo_in_space_{}.csv", o.label()), distribution_csv(run, &targets)?);
            dumps.extend(placebo_fits_json(run));
        }
        bundle.insert("fits_placebo.json".into(), pretty(&Value::Array(dumps)));
    }
    if let Some(in_unit) = &results.in_unit {
        let mut dumps = Vec::new();
        for (o, run) in in_unit {
            dumps.extend(placebo_fits_json(run));
            if let Some(pl) = &results.placebos {
                bundle.insert(format!("placebo_in_unit_{}.csv", o.label()), distribution_csv(&pl[o], &run.fits)?);
            }
        }
        bundle.insert("fits_in_unit.json".into(), pretty(&Value::Array(dumps)));
    }
    if let Some(in_time) = &results.in_time {
        let mut dumps = Vec::new();
        for (o, run) in in_time {
            dumps.extend(placebo_fits_json(&run.targets));
            dumps.extend(placebo_fits_json(&run.controls));
            bundle.insert(format!("placebo_in_time_{}.csv", o.label()), distribution_csv(&run.controls, &run.targets.fits)?);
        }
        bundle.insert("fits_in_time.json".into(), pretty(&Value::Array(dumps)));
    }
    if let Some(ext) = &results.extension {
        let mut dumps = Vec::new();
        let mut rows = Vec::new();
        for (&o, run) in ext {
            dumps.extend(target_fits_json(o, &run.targets));
            dumps.extend(placebo_fits_json(&run.placebos));
            for t in &run.targets {
                let effect = |y: u16| t.ok().and_then(|f| f.effect(Season::new(y).unwrap()));
                rows.push(vec![t.player_id.to_string(), o.label().into(), opt(effect(2023)), opt(effect(2024))]);
            }
            bundle.insert(
                format!("placebo_extension_{}.csv", o.label()),
                distribution_csv(&run.placebos, &ok_fits(&run.targets))?,
            );
        }
        bundle.insert("fits_extension.json".into(), pretty(&Value::Array(dumps)));
        bundle.insert("extension.csv".into(), rows_to_csv("player_id,outcome,effect_2023,effect_2024", rows));
    }
    if let Some(only) = &results.extension_only_2024 {
        let dumps: Vec<Value> = only.iter().flat_map(|(&o, fits)| target_fits_json(o, fits)).collect();
        bundle.insert("fits_extension_only_2024.json".into(), pretty(&Value::Array(dumps)));
    }
    if let Some(dose) = &results.dose_response {
        let rows = dose.iter().map(|(o, fit)| match fit {
            Ok(f) => vec![o.label().into(), f.slope.to_string(), f.intercept.to_string(), f.n.to_string(), (f.slope * 0.1).to_string(), String::new()],
            Err(e) => vec![o.label().into(), String::new(), String::new(), String::new(), String::new(), e.clone()],
        });
        bundle.insert(
            "dose_response.csv".into(),
            rows_to_csv("outcome,slope,intercept,n,effect_per_10_points,error", rows),
        );
    }
    Ok(())
}

fn summary(results: &RunResults) -> String {
    let mut s = String::new();
    let c = &results.config;
    writeln!(s, "panelcause report").unwrap();
    writeln!(s, "config sha256: {}", results.config_hash).unwrap();
    for (file, hash) in &results.input_hashes {
        writeln!(s, "input {file} sha256: {hash}").unwrap();
    }
    writeln!(s, "analyses: {}", results.analyses.enabled().join(", ")).unwrap();
    writeln!(s).unwrap();

    if let Some(did) = &results.did {
        writeln!(s, "League DID, LHB vs RHB, bases empty ({} vs previous season)", c.intervention_year).unwrap();
        for d in did {
            if let Some(r) = d.at(c.intervention_year) {
                write!(s, "  {:<6} DID {:+.4}", d.outcome.label(), r.did_estimate).unwrap();
                if let Some(att) = &d.rescaled_att {
                    write!(s, "  league-wide {:+.4}", att.estimate).unwrap();
                }
                writeln!(s).unwrap();
            }
        }
        writeln!(s, "Identifying assumptions:").unwrap();
        for a in ASSUMPTIONS {
            writeln!(s, "  - {a}").unwrap();
        }
        writeln!(s).unwrap();
    }

    if let Some(cohorts) = &results.cohorts {
        let count = |k: Cohort| cohorts.iter().filter(|x| x.cohort == k).count();
        writeln!(
            s,
            "Cohorts: {} high, {} low, {} in-unit, {} medium",
            count(Cohort::High),
            count(Cohort::Low),
            count(Cohort::InUnitPlacebo),
            count(Cohort::Medium)
        )
        .unwrap();
    }
    if let Some(n) = &results.extension_counts {
        writeln!(
            s,
            "2024 extension: {} targets, {} controls; 2024-only gate: {} targets",
            n.targets, n.controls, n.only_2024_targets
        )
        .unwrap();
    }

    if let Some(main) = &results.main {
        writeln!(s).unwrap();
        writeln!(s, "Synthetic control estimates ({})", c.intervention_year).unwrap();
        writeln!(s, "{SCALING_NOTE}").unwrap();
        for (o, fits) in main {
            let est: Vec<f64> = fits.iter().filter_map(TargetFit::ok).map(ScmFit::headline_effect).collect();
            let failed = fits.len() - est.len();
            let positive = est.iter().filter(|e| **e > 0.0).count();
            write!(s, "  {:<5} {} targets, {} positive", o.label(), est.len(), positive).unwrap();
            if failed > 0 {
                write!(s, ", {failed} failed").unwrap();
            }
            if let Some(pl) = &results.placebos {
                let d = &pl[o].distribution;
                write!(s, "; placebos {} fitted, {} failed, share positive {:.3}", d.estimates().len(), d.failed(), d.share_positive().unwrap_or(f64::NAN)).unwrap();
            }
            writeln!(s).unwrap();
        }
        if results.placebos.is_some() {
            writeln!(s, "{PLACEBO_CAVEAT}").unwrap();
        }
    }
    if let Some(dose) = &results.dose_response {
        writeln!(s).unwrap();
        writeln!(s, "Dose response (effect per 10 points of 2022 shift rate)").unwrap();
        for (o, fit) in dose {
            match fit {
                Ok(f) => writeln!(s, "  {:<5} {:+.4}", o.label(), f.slope * 0.1).unwrap(),
                Err(e) => writeln!(s, "  {:<5} not estimable: {e}", o.label()).unwrap(),
            }
        }
    }
    s
}

/// Build every file of the bundle in memory.
pub fn build_bundle(results: &RunResults) -> CliResult<Bundle> {
    let mut bundle = Bundle::new();
    did_files(results, &mut bundle)?;
    scm_files(results, &mut bundle)?;
    for id in FIGURE_IDS {
        match figure_rows(results, id) {
            Ok(rows) => {
                bundle.insert(format!("figures/{id}.csv"), figure_csv(&rows));
            }
            Err(CliError::AnalysisNotRun(_)) => {}
            Err(e) => return Err(e),
        }
    }
    bundle.insert("summary.txt".into(), summary(results));
    let files: BTreeMap<&String, String> = bundle.iter().map(|(k, v)| (k, sha256_hex(v.as_bytes()))).collect();
    let manifest = json!({
        "tool": "panelcause",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": results.config_hash,
        "config": serde_json::from_str::<Value>(&results.config.canonical()).expect("canonical config is json"),
        "inputs": results.input_hashes,
        "analyses": results.analyses.enabled(),
        "files": files,
    });
    bundle.insert("manifest.json".into(), pretty(&manifest));
    Ok(bundle)
}

/// Write a bundle under `dir`, creating directories as needed.
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, contents) in bundle {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
