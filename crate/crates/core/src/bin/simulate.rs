use clap::Parser;
use dmimo::cli::{parse_config_with_overrides, run_recipe, write_output, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a distributed-MIMO Monte Carlo recipe and emit CSV.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Recipe file (key = value lines).
    recipe: PathBuf,

    /// Override the recipe seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Write CSV here instead of the recipe's `output` or stdout.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,

    /// Extra `key=value` settings applied after the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(args: Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.recipe).map_err(|source| CliError::Io {
        path: args.recipe.display().to_string(),
        source,
    })?;
    let mut overrides = args.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let recipe = parse_config_with_overrides(&text, &overrides)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Config {
            location: None,
            message: "--workers must be at least 1".into(),
        });
    }
    let csv = run_recipe(&recipe, workers)?;
    match args.output.or(recipe.output.clone()) {
        Some(path) => write_output(&path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simulate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
