use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use congestion_mfg::cli::{cmd_audit, cmd_solve, cmd_sweep, cmd_validate, CommandOptions, ExitStatus};
use congestion_mfg::config::{RunConfig, DEFAULT_CONFIG};

/// Stationary mean-field games with congestion: solve, audit, validate, sweep.
#[derive(Parser)]
#[command(name = "mfgc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file; the bundled default is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run even when (gamma, alpha, d) violates the admissibility inequalities.
    #[arg(long)]
    override_admissibility: bool,
    /// Output directory, replacing `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Continue from lambda = 0 to lambda = 1 and write fields and reports.
    Solve(Common),
    /// Check the Hamiltonian assumptions and parameter inequalities.
    Audit(Common),
    /// Evaluate diagnostics on `u.csv` and `m.csv` from a directory.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Directory holding `u.csv` and `m.csv`; defaults to the output directory.
        #[arg(long)]
        fields: Option<PathBuf>,
    },
    /// Solve over a grid of (gamma, alpha) pairs.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        alpha: Vec<f64>,
    },
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("config {}", path.display())),
        None => Ok(RunConfig::parse(DEFAULT_CONFIG)?),
    }
}

fn run(cli: Cli) -> ExitStatus {
    let common = match &cli.command {
        Command::Solve(c) | Command::Audit(c) => c,
        Command::Validate { common, .. } | Command::Sweep { common, .. } => common,
    };
    let cfg = match load(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitStatus::InputError;
        }
    };
    let opts = CommandOptions { override_admissibility: common.override_admissibility, out_dir: common.out.clone() };
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    match &cli.command {
        Command::Solve(_) => cmd_solve(&cfg, &opts, &mut out, &mut err),
        Command::Audit(_) => cmd_audit(&cfg, &mut out, &mut err),
        Command::Validate { fields, .. } => {
            let dir = fields.clone().or(opts.out_dir).unwrap_or_else(|| cfg.output_dir.clone());
            cmd_validate(&dir, &cfg, &mut out, &mut err)
        }
        Command::Sweep { gamma, alpha, .. } => cmd_sweep(&cfg, gamma, alpha, &opts, &mut out, &mut err),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::InputError.code() } else { 0 });
        }
    };
    ExitCode::from(run(cli).code())
}
