//! `fracemb`: exponent queries, verification campaigns and solver runs.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::verify::Campaign;
use config::{CommonArgs, Settings};
use output::Output;

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "fracemb", version, about = "Weighted fractional Sobolev embeddings: exponents, checks and solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Admissible exponent ranges for a potential family.
    Exponents {
        /// One of the four worked examples (1 power, 2 zero V, 3 exponential, 4 mixed).
        #[arg(long)]
        example: Option<u8>,
    },
    /// Numerical verification campaign.
    Verify {
        #[arg(value_enum)]
        campaign: Campaign,
    },
    /// Mountain-pass solutions, several of them with --count.
    Solve,
    /// Exponent ranges across fractional orders, for plotting.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exponents { .. } => "exponents",
            Command::Verify { .. } => "verify",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let settings = Settings::resolve(&cli.common)?;
    if let Some(j) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global()?;
    }
    let mut out = Output::new(cli.common.out.as_deref())?;
    let mut campaign_name = None;
    let code = match &cli.command {
        Command::Exponents { example } => {
            let res = commands::exponents::run(&settings, *example, cli.common.a, cli.common.b, cli.common.d, &mut out)?;
            print_json(&res)?;
            0
        }
        Command::Verify { campaign } => {
            campaign_name = Some(campaign.name());
            let res = commands::verify::run(*campaign, &settings, &mut out)?;
            print_json(&res)?;
            warn_all(&res.warnings);
            let failed = res.summary.failed > 0 || (settings.strict && !res.warnings.is_empty());
            u8::from(failed)
        }
        Command::Solve => {
            let res = commands::solve::run(&settings, &mut out)?;
            print_json(&res)?;
            u8::from(settings.strict && !res.warnings.is_empty())
        }
        Command::Sweep => {
            let res = commands::sweep::run(&settings, &mut out)?;
            print_json(&res)?;
            0
        }
    };
    out.finish(cli.command.name(), campaign_name, cli.common.config.as_deref(), cli.common.jobs, &settings)?;
    Ok(ExitCode::from(code))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<fracemb::Error>() {
        Some(fracemb::Error::Domain(_) | fracemb::Error::Usage(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(fracemb::Error::Solver { history, .. }) = err.downcast_ref::<fracemb::Error>() {
                eprintln!("history (iteration, path maximum):");
                for (it, e) in history {
                    eprintln!("{it} {e:e}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
