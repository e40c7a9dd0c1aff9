//! calabiflow: classify, integrate, and certify Calabi-symmetric Kähler-Ricci
//! flows on ℙ(O(-k) ⊕ O) → ℙ^{n-1}.
//!
//! Exit codes: 0 all applicable certificates pass; 1 certificate violation or
//! run failure; 2 usage error.

// `!(x > 0.0)` rejects NaN along with the wrong sign; see core.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod config;
mod scenario;

use clap::{Args, Parser, Subcommand};
use config::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "calabiflow",
    version,
    about = "Kähler-Ricci flow on projective line bundles under Calabi symmetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the singularity case, singular time, and limit description
    Classify(ScenarioArgs),
    /// Integrate the flow; write series.csv, report.json, scenario.txt
    Run(ScenarioArgs),
    /// Recompute certificates for an existing run directory
    Certify(CertifyArgs),
    /// Run scenarios listed in a file (one line of run-style flags each)
    Batch(BatchArgs),
}

/// Scenario flags. Every flag overrides the matching config-file key; the
/// config-file spelling of `--m` is `grid`. Output directory precedence:
/// --out-dir > config file > $CALABI_OUT > ./out.
#[derive(Args, Debug, Default, Clone)]
pub struct ScenarioArgs {
    /// Complex dimension n >= 2 of the total space
    #[arg(long)]
    n: Option<u32>,
    /// Twisting degree k >= 1 of the bundle
    #[arg(long)]
    k: Option<u32>,
    /// Initial class restriction to the zero section (0 < a0 < b0)
    #[arg(long)]
    a0: Option<f64>,
    /// Initial class restriction to the infinity section
    #[arg(long)]
    b0: Option<f64>,
    /// Grid size (default 401; config-file key `grid`)
    #[arg(long)]
    m: Option<usize>,
    /// CFL number in (0, 1) (default 0.4)
    #[arg(long)]
    cfl: Option<f64>,
    /// Stop at T minus this margin (default 1e-3)
    #[arg(long)]
    t_stop_margin: Option<f64>,
    /// Snapshot spacing (default T/50)
    #[arg(long)]
    snapshot_interval: Option<f64>,
    /// Output directory for run artifacts
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Flat key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Run directory holding scenario.txt and series.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Config file consulted for out_dir when --out-dir is absent
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// File with one scenario per line (whitespace-separated run flags)
    file: PathBuf,
    /// Scenarios to run concurrently
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Wrapper so batch lines parse through the same clap grammar as `run`.
#[derive(Parser, Debug)]
#[command(name = "scenario-line", no_binary_name = true)]
struct LineArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Classify(args) => {
            let cfg = config::resolve(&args)?;
            print!("{}", scenario::classify_text(&cfg));
            Ok(true)
        }
        Command::Run(args) => {
            let cfg = config::resolve(&args)?;
            let outcome = scenario::execute(&cfg)?;
            print!("{}", outcome.summary);
            Ok(outcome.report.pass)
        }
        Command::Certify(args) => {
            let dir = config::resolve_out_dir(args.out_dir.as_deref(), args.config.as_deref())?;
            let (pass, text) = scenario::certify_dir(&dir)?;
            print!("{text}");
            Ok(pass)
        }
        Command::Batch(args) => {
            let text = std::fs::read_to_string(&args.file).map_err(|e| {
                CliError::Usage(format!("cannot read {}: {e}", args.file.display()))
            })?;
            let mut configs = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let parsed = LineArgs::try_parse_from(line.split_whitespace()).map_err(|e| {
                    CliError::Usage(format!("{}:{}: {e}", args.file.display(), idx + 1))
                })?;
                configs.push(config::resolve(&parsed.scenario).map_err(|e| match e {
                    CliError::Usage(msg) => {
                        CliError::Usage(format!("{}:{}: {msg}", args.file.display(), idx + 1))
                    }
                    other => other,
                })?);
            }
            if configs.is_empty() {
                return Err(CliError::Usage(format!(
                    "{}: no scenarios",
                    args.file.display()
                )));
            }
            let (pass, out) = scenario::run_batch(&configs, args.jobs)?;
            print!("{out}");
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Run(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
