//! `collrec`: runs the recommender experiment one stage at a time, with
//! every artifact and its manifest under one directory.

mod artifacts;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use collrec_core::pipeline::PipelineConfig;

use artifacts::{sha256_hex, Artifacts};
use commands::Ctx;
use error::CliError;

#[derive(Parser)]
#[command(name = "collrec", version, about = "Curated-collection recommender experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use or overwrite artifacts built from a different configuration.
    #[arg(long, global = true)]
    force: bool,
    /// Overrides the configured artifact directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate the marketplace, item embeddings and logged sessions.
    Generate,
    /// Build the labeled pair datasets from the logged sessions.
    BuildDataset,
    /// Train every model variant of the ladder.
    Train,
    /// Pairwise accuracy of every variant and of the oracle on the test pairs.
    Eval,
    /// Simulated A/B test of `eval.ab_control` against `eval.ab_variant`.
    Abtest,
    /// The whole ladder experiment in memory, over `eval.ladder_seeds` seeds.
    Ladder,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            PipelineConfig::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.artifact_dir = out.clone();
    }
    cfg.validate()?;
    if cfg.artifact_dir.exists() && !cfg.artifact_dir.is_dir() {
        return Err(CliError::Config(format!(
            "artifact_dir {} is not a directory",
            cfg.artifact_dir.display()
        )));
    }
    Ok(cfg)
}

/// Hash of everything in the configuration except where artifacts go.
fn config_hash(cfg: &PipelineConfig) -> String {
    let mut c = cfg.clone();
    c.artifact_dir = PathBuf::new();
    sha256_hex(c.to_toml_string().as_bytes())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let art = Artifacts::new(cfg.artifact_dir.clone(), config_hash(&cfg), cfg.seed, cli.force);
    let ctx = Ctx {
        cfg,
        art,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::BuildDataset => commands::build_dataset(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Abtest => commands::abtest(&ctx),
        Command::Ladder => commands::ladder(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
