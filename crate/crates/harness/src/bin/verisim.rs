use std::io;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use verisim::output::write_csv;
use verisim::theory::{theory_report, TheoryReport};
use verisim::{run_experiment, write_report, ExperimentConfig, ExperimentKind, Format, Report, RunOptions};

/// Run verifier-filtered retraining experiments.
#[derive(Parser, Debug)]
#[command(name = "verisim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the number of replications
    #[arg(long, global = true)]
    reps: Option<u64>,

    /// Output directory
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One-step error reduction over a (delta, r) grid
    Landscape,
    /// Iterative linear-regression retraining
    Iterate,
    /// Iterative 1-D Gaussian mean estimation
    Gaussian1d,
    /// Print closed-form predictions as CSV without simulating
    Theory,
    /// Check a config and print it with defaults filled in
    Validate,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OutputFormat {
    Csv,
    Json,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(reps) = cli.reps {
        config.replications = reps;
    }
    Ok(config)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = load(&cli)?;
    let resolved = config.resolve()?;

    let expected = match cli.command {
        Command::Landscape => Some(ExperimentKind::Landscape),
        Command::Iterate => Some(ExperimentKind::Iterate),
        Command::Gaussian1d => Some(ExperimentKind::Gaussian1d),
        Command::Theory | Command::Validate => None,
    };
    if let Some(kind) = expected {
        if kind != config.experiment {
            bail!(
                "config describes a `{}` experiment, not `{}`",
                config.experiment.name(),
                kind.name()
            );
        }
    }

    match cli.command {
        Command::Validate => {
            print!("{}", config.with_defaults()?.to_toml_string()?);
        }
        Command::Theory => {
            let out = io::stdout().lock();
            match theory_report(&resolved, config.seed)? {
                TheoryReport::Landscape(rows) => write_csv(out, &rows)?,
                TheoryReport::Iterate(rows) => write_csv(out, &rows)?,
                TheoryReport::Gaussian1d(rows) => write_csv(out, &rows)?,
            }
        }
        _ => {
            let format = match cli.format {
                OutputFormat::Csv => Format::Csv,
                OutputFormat::Json => Format::Json,
            };
            let report = run_experiment(&config, RunOptions { threads: cli.threads })?;
            let path = write_report(&report, &config, &cli.out, format)?;
            if let Report::Gaussian1d(r) = &report {
                if let Some(h) = &r.hitting {
                    eprintln!(
                        "{} of {} replications crossed {} {} ({:.1}%)",
                        h.hits,
                        h.replications,
                        h.crossing,
                        h.level,
                        100.0 * h.fraction()
                    );
                }
            }
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}
