use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::error;
use mier_core::harness::{run, Mode, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    MetaTrain,
    Adapt,
    Eval,
    CheckGrads,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::MetaTrain => Mode::MetaTrain,
            ModeArg::Adapt => Mode::Adapt,
            ModeArg::Eval => Mode::Eval,
            ModeArg::CheckGrads => Mode::CheckGrads,
        }
    }
}

/// Meta-learned context models with experience relabeling.
///
/// Log verbosity is read from MIER_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "mier", version)]
struct Cli {
    /// What to run.
    mode: ModeArg,
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIER_LOG", "info")).init();
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|mut cfg| {
        cfg.mode = cli.mode.into();
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = cli.out_dir {
            cfg.out_dir = dir;
        }
        run(&cfg)
    });
    match result {
        Ok(summary) => {
            if let Some(e) = summary.max_rel_error {
                println!("max relative error {e:e}");
            }
            if let Some(r) = summary.mean_return {
                println!("mean return {r:.4}");
            }
            if let Some(p) = summary.checkpoint {
                println!("checkpoint {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("[{}] {e}", e.kind());
            eprintln!("error [{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
