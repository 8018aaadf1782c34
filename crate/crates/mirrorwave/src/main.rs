use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mirrorwave::commands::{self, RunContext};
use mirrorwave::{CliError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mirrorwave", version, about = "Motional coherence from spontaneous emission near a mirror")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (JSON); defaults apply to everything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shot-noise seed, overriding `seed` of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Momentum distribution before and after the emission.
    EmitPattern,
    /// Fringes and per-bin fits at the configured mean distance.
    Fringe,
    /// Visibility against mean distance, quantum and semiclassical.
    ScanDistance,
    /// Visibility of every momentum bin with the grating acceptance.
    MomentumVisibility,
    /// Fit a fringe CSV file.
    Fit { file: PathBuf },
    /// Print the default configuration.
    Defaults,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = RunContext { out: config.output_dir.clone(), config, plot: cli.plot };
    let files = match cli.command {
        Command::Defaults => {
            // a closed pipe (e.g. `| head`) is not an error here
            let _ = writeln!(std::io::stdout().lock(), "{}", ScenarioConfig::default().to_json());
            return Ok(());
        }
        Command::EmitPattern => commands::emit_pattern(&ctx)?,
        Command::Fringe => commands::fringe(&ctx)?,
        Command::ScanDistance => commands::scan_distance(&ctx)?,
        Command::MomentumVisibility => commands::momentum_visibility(&ctx)?,
        Command::Fit { file } => commands::fit_file(&ctx, &file)?,
    };
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
