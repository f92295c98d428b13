//! `evidal`: generate shifted benchmarks, run evidential active domain
//! adaptation, evaluate checkpoints and run the numerical oracle checks.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
//! numerical failure (including a failed verification check).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evidal::data::DomainTag;
use evidal::verify::{Fault, VerifyLevel, VerifyOptions};
use serde_json::Value;

use crate::config::{CommonArgs, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "evidal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic source/target datasets as CSV plus a manifest.
    GenData(CommonArgs),
    /// Train with active target selection; writes report.json and checkpoint.json.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Accuracy, calibration and uncertainty summaries of a checkpoint on a CSV dataset.
    Eval(EvalArgs),
    /// Check the closed forms against sampling, quadrature, finite differences and brute force.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Domain {
    Source,
    Target,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// CSV file of `label,f1,...,fd` rows.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "target")]
    domain: Domain,
    /// The CSV has no header line.
    #[arg(long)]
    no_header: bool,
    #[arg(long, value_name = "N", default_value_t = 10)]
    ece_bins: usize,
    /// Also write metrics.json into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    /// `quick` uses fewer samples and looser statistical tolerances.
    #[arg(long, value_parser = parse_level, default_value = "full")]
    level: VerifyLevel,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Also write verify.json into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Test mode: scale every digamma value in the closed forms by 1 + EPS.
    #[arg(long, value_name = "EPS", hide = true)]
    inject_digamma_fault: Option<f64>,
}

fn parse_level(s: &str) -> Result<VerifyLevel, String> {
    s.parse().map_err(|e: evidal::Error| e.to_string())
}

fn print_json(doc: &Value) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(doc)?);
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData(common) => {
            let cfg = RunConfig::resolve(&common, &Overrides::default())?;
            print_json(&commands::gen_data(&cfg)?)
        }
        Command::Run { common, overrides } => {
            let cfg = RunConfig::resolve(&common, &overrides)?;
            print_json(&commands::run(&cfg)?)
        }
        Command::Eval(a) => {
            let input = commands::EvalInput {
                checkpoint: &a.checkpoint,
                data: &a.data,
                domain: match a.domain {
                    Domain::Source => DomainTag::Source,
                    Domain::Target => DomainTag::Target,
                },
                has_header: !a.no_header,
                ece_bins: a.ece_bins,
                out: a.out.as_ref(),
            };
            print_json(&commands::eval(&input)?)
        }
        Command::Verify(a) => {
            let opts = VerifyOptions {
                level: a.level,
                seed: a.seed.unwrap_or(VerifyOptions::default().seed),
                fault: a.inject_digamma_fault.map(Fault::DigammaScale),
            };
            commands::verify(&opts, a.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evidal: {e}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
