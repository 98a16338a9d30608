use std::panic;
use std::process::ExitCode;

use clap::Parser;
use spillover_cli::{run, Cli, Command, RunConfig};

/// Caps rayon's pool at `SPILLOVER_THREADS` when set.
fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SPILLOVER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SPILLOVER_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("spillover: {e}");
        return ExitCode::from(2);
    }
    let Command::Run(args) = cli.command;
    let result = panic::catch_unwind(|| RunConfig::resolve(&args).and_then(|c| run(&c)));
    match result {
        Ok(Ok(outcome)) => {
            let lag = outcome
                .lag
                .map_or("per window".to_string(), |p| p.to_string());
            eprintln!(
                "spillover: {} windows (lag {lag}), {} files written to {}",
                outcome.windows,
                outcome.files.len(),
                outcome.output_dir.display()
            );
            if let Some(tci) = outcome.r2_tci {
                eprintln!("  averaged TCI (R²): {tci:.2}");
            }
            if let Some(tci) = outcome.dy_tci {
                eprintln!("  averaged TCI (DY): {tci:.2}");
            }
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("spillover: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("spillover: internal error");
            ExitCode::from(1)
        }
    }
}
