use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqir::scenario::{run_scenario, validate_config, Scenario, ScenarioError};

/// Age-structured SEQIR scenarios: R0, steady states, Lyapunov checks and
/// optimal vaccination.
#[derive(Parser)]
#[command(name = "seqir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis selected by the config and write {run}.csv / {run}.json.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of age nodes.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Maximal age in years.
        #[arg(long)]
        a_max: Option<f64>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    validate_config(&text, stem).map_err(ScenarioError::Config)
}

fn run(cmd: Command) -> Result<(), ScenarioError> {
    match cmd {
        Command::Validate { config } => {
            let s = load(&config)?;
            println!("{}: ok (run = {}, a_max = {}, n = {})", s.name, s.run, s.a_max, s.n);
            Ok(())
        }
        Command::Run { config, out, grid_n, a_max } => {
            let mut s = load(&config)?;
            if let Some(dir) = out {
                s.output_dir = dir;
            }
            if let Some(n) = grid_n {
                s.n = n;
            }
            if let Some(a) = a_max {
                s.a_max = a;
            }
            let outcome = run_scenario(&s)?;
            println!("{}", outcome.summary);
            for path in &outcome.artifacts {
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
