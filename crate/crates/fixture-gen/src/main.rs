use std::path::PathBuf;
use std::process::ExitCode;

use panelcause_fixture_gen::{generate, DEFAULT_SEED};

fn main() -> ExitCode {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/fixture"));
    let fixture = match generate(DEFAULT_SEED) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = fixture.write(&dir) {
        eprintln!("error: {}: {e}", dir.display());
        return ExitCode::FAILURE;
    }
    println!("wrote fixture to {}", dir.display());
    ExitCode::SUCCESS
}
