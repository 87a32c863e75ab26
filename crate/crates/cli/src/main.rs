use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bnlab::dynamics::Fault;
use bnlab::harness::{execute, ExperimentConfig, ExperimentKind, Overrides, EXIT_FAILURE};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bnlab", version, about = "Batch-normalized gradient descent on least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One GD or BNGD trajectory.
    Run(Common),
    /// (ε_a, ε) grid with four-color classification.
    Sweep(Common),
    /// Ω against dimension.
    DimScan(Common),
    /// β̄ and Ω for one spectrum.
    Omega(Common),
    /// Scaling-equivalence check on random transforms.
    ScalingCheck(Common),
    /// The full invariant suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated suite names; an empty value runs nothing.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// Test hook: corrupt every verified BNGD step.
        #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "flip-w-step")]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// 0 = all cores, 1 = sequential.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every M-th step after the first 1000.
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipWStep,
    FlipAUpdate,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::FlipWStep => Fault::FlipWStep,
            FaultArg::FlipAUpdate => Fault::FlipAUpdate,
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}

fn real_main() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    let (kind, common, checks, fault) = match cli.command {
        Command::Run(c) => (ExperimentKind::SingleRun, c, None, None),
        Command::Sweep(c) => (ExperimentKind::Sweep, c, None, None),
        Command::DimScan(c) => (ExperimentKind::DimScan, c, None, None),
        Command::Omega(c) => (ExperimentKind::Omega, c, None, None),
        Command::ScalingCheck(c) => (ExperimentKind::ScalingCheck, c, None, None),
        Command::Verify {
            common,
            checks,
            inject_fault,
        } => (ExperimentKind::Verify, common, checks, inject_fault),
    };
    let file = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let ov = Overrides {
        seed: common.seed,
        workers: common.workers,
        out_dir: common.out,
        thin: common.thin,
    };
    let mut cfg = file.resolve(kind, &ov)?;
    if let Some(v) = cfg.verify.as_mut() {
        if let Some(list) = checks {
            // `--checks ''` parses as one empty name
            v.checks = Some(list.into_iter().filter(|s| !s.is_empty()).collect());
        }
        if let Some(f) = fault {
            v.fault = Some(f.into());
        }
    }
    let out = execute(&cfg).with_context(|| format!("{} failed", kind.name()))?;
    println!("{}: {}", kind.name(), out.summary);
    println!("wrote {} files to {}", out.artifacts.len() + 1, out.out_dir.display());
    Ok(out.exit_code)
}
