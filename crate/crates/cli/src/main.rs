use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panelcause_cli::config::{Analyses, RunConfig};
use panelcause_cli::error::{error_report, CliError};
use panelcause_cli::pipeline::{fit_single, run};
use panelcause_cli::report::{build_bundle, figure_csv, figure_rows, fit_json, write_bundle, FIGURE_IDS};
use panelcause_core::PlayerId;
use serde_json::{json, Value};

/// Shift-ban effects on left-handed hitters: league DID and player-level
/// synthetic controls with placebo inference.
#[derive(Debug, Parser)]
#[command(name = "panelcause", version)]
struct Cli {
    /// TOML run configuration. Missing keys take their defaults.
    #[arg(long, global = true, default_value = "run.cfg")]
    config: PathBuf,

    /// Directory the report bundle is written to.
    #[arg(long, global = true, default_value = "report")]
    out_dir: PathBuf,

    /// Comma-separated analyses to run, overriding the config file.
    #[arg(long, global = true)]
    analyses: Option<String>,

    /// Accepted for compatibility. Every estimator is deterministic.
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured analyses and write the full report bundle.
    Run,
    /// League-level difference-in-differences only.
    Did,
    /// Fit one player and print the fit as JSON.
    Scm {
        #[arg(long)]
        target: String,
    },
    /// Main fits with in-space, in-unit and in-time placebos.
    Placebo,
    /// Write figure data, all figures or one.
    Figures {
        #[arg(long)]
        figure: Option<String>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, Vec<CliError>> {
    if path.exists() {
        RunConfig::load(path).map_err(|e| vec![e])
    } else if path == Path::new("run.cfg") {
        Ok(RunConfig::default())
    } else {
        Err(vec![CliError::Io { path: path.to_path_buf(), source: std::io::ErrorKind::NotFound.into() }])
    }
}

fn write_and_report(results: &panelcause_cli::pipeline::RunResults, out_dir: &Path) -> Result<(), Vec<CliError>> {
    let bundle = build_bundle(results).map_err(|e| vec![e])?;
    let written = write_bundle(&bundle, out_dir).map_err(|e| vec![e])?;
    if let Some(summary) = bundle.get("summary.txt") {
        print!("{summary}");
    }
    println!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Vec<CliError>> {
    let config = load_config(&cli.config)?;
    let configured = match &cli.analyses {
        Some(list) => Analyses::parse_list(list).map_err(|e| vec![e])?,
        None => config.analyses,
    };
    match &cli.command {
        Command::Run => write_and_report(&run(&config, &configured)?, &cli.out_dir),
        Command::Did => {
            let analyses = Analyses { did: true, ..Analyses::none() };
            write_and_report(&run(&config, &analyses)?, &cli.out_dir)
        }
        Command::Placebo => {
            let analyses = Analyses { scm: true, placebos: true, in_unit: true, in_time: true, ..Analyses::none() };
            write_and_report(&run(&config, &analyses)?, &cli.out_dir)
        }
        Command::Scm { target } => {
            let fits = fit_single(&config, &PlayerId::new(target.as_str()))?;
            let out: Vec<Value> = fits
                .iter()
                .map(|(o, t)| match &t.fit {
                    Ok(fit) => fit_json(fit),
                    Err(e) => json!({ "target": t.player_id, "outcome": o, "error": e }),
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&out).expect("json serializes"));
            Ok(())
        }
        Command::Figures { figure } => {
            if let Some(id) = figure {
                if !FIGURE_IDS.contains(&id.as_str()) {
                    return Err(vec![CliError::AnalysisNotRun(id.clone())]);
                }
            }
            let results = run(&config, &configured)?;
            let ids: Vec<&str> = match figure {
                Some(id) => vec![id.as_str()],
                None => FIGURE_IDS.to_vec(),
            };
            let mut bundle = panelcause_cli::report::Bundle::new();
            for id in ids {
                match figure_rows(&results, id) {
                    Ok(rows) => {
                        bundle.insert(format!("figures/{id}.csv"), figure_csv(&rows));
                    }
                    Err(e) if figure.is_some() => return Err(vec![e]),
                    Err(_) => eprintln!("skipping {id}: its analysis was not run"),
                }
            }
            for path in write_bundle(&bundle, &cli.out_dir).map_err(|e| vec![e])? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(errors) => {
            eprintln!("{}", error_report(&errors));
            ExitCode::FAILURE
        }
    }
}
