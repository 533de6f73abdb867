//! Batch driver: each verb runs one stage, reading upstream checkpoints from
//! the output directory and refusing to run on stale or missing inputs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qpwave_cli::config::RunConfig;
use qpwave_cli::error::CliError;
use qpwave_cli::manifest::Manifest;
use qpwave_cli::stages::{run_stage, Context, Stage};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Verb {
    Spectrum,
    Localize,
    Extract,
    Vacuum,
    Lightcone,
    Propagator,
    Scatter,
    Detect,
    All,
}

#[derive(Parser, Debug)]
#[command(name = "qpwave", version, about = "Quasiparticle wave packets in 1D lattice gauge theories")]
struct Args {
    verb: Verb,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted `KEY=VAL` override, e.g. `model.lambda=0.25`; repeatable.
    #[arg(long = "stage-override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

fn stages_for(verb: Verb) -> Vec<Stage> {
    match verb {
        Verb::Spectrum => vec![Stage::Spectrum],
        Verb::Localize => vec![Stage::Localize],
        Verb::Extract => vec![Stage::Extract],
        Verb::Vacuum => vec![Stage::Vacuum],
        Verb::Lightcone => vec![Stage::Lightcone],
        Verb::Propagator => vec![Stage::Propagator],
        Verb::Scatter => vec![Stage::Scatter],
        Verb::Detect => vec![Stage::Detect],
        Verb::All => Stage::PIPELINE.to_vec(),
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let cfg = RunConfig::load(&text, &args.overrides, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let manifest = Manifest::open(&args.out, &cfg)?;
    let mut ctx = Context { out: &args.out, cfg: &cfg, manifest };
    ctx.manifest.save(&args.out)?;
    for stage in stages_for(args.verb) {
        run_stage(&mut ctx, stage)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
