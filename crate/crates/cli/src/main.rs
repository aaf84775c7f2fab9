//! `mbesov` — command-line frontend for the metric-besov toolkit.
//!
//! Exit codes: `0` success, `1` computational or usage error, `2` refusal
//! because the requested parameters violate a hypothesis window (the
//! message names the violated inequality and the window it comes from).

mod analysis;
mod operators;
mod reports;
mod spaces;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use metric_besov::aoi::CalculusConfig;
use metric_besov::besov::QIndex;
use metric_besov::ensemble::EnsembleSpec;
use metric_besov::space::PointCloudSpace;
use metric_besov::{Error, Result};

/// Library version stamped into every JSON report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "mbesov",
    version,
    about = "Smoothness analysis on finite metric measure spaces",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build spaces and subsets; estimate scaling exponents; query balls.
    #[command(subcommand)]
    Space(spaces::SpaceCmd),
    /// Smoothness norms and scale profiles of sampled functions.
    #[command(subcommand)]
    Besov(analysis::BesovCmd),
    /// Covers of the complement of a subset by disjoint balls.
    #[command(subcommand)]
    Whitney(analysis::WhitneyCmd),
    /// Extension and restriction operators across a subset and their
    /// boundedness harnesses.
    #[command(subcommand)]
    Trace(analysis::TraceCmd),
    /// Smoothing-kernel assembly, caching and bound measurements.
    #[command(subcommand)]
    Kernel(operators::KernelCmd),
    /// Fractional derivatives and potential norms.
    #[command(subcommand)]
    Calculus(operators::CalculusCmd),
    /// K-functionals, interpolated norms and interpolation harnesses.
    #[command(subcommand)]
    Interp(operators::InterpCmd),
    /// Bundled demo reports and the report schema.
    #[command(subcommand)]
    Report(reports::ReportCmd),
}

/// Flags shared by every command that runs the smoothing calculus.
#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// Upper end of the trusted smoothness window (defaults to the library
    /// default).
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Lower end of the scale-quadrature window.
    #[arg(long)]
    pub tmin: Option<f64>,
    /// Upper end of the scale-quadrature window.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Node count of the scale quadrature.
    #[arg(long)]
    pub tnodes: Option<usize>,
}

impl ConfigArgs {
    pub fn to_config(&self) -> CalculusConfig {
        let mut config = CalculusConfig::default();
        if let Some(v) = self.alpha0 {
            config.alpha_0 = v;
        }
        if let Some(v) = self.tmin {
            config.t_min = v;
        }
        if let Some(v) = self.tmax {
            config.t_max = v;
        }
        if let Some(v) = self.tnodes {
            config.t_nodes = v;
        }
        config
    }
}

/// Flags shared by every ensemble-driven harness.
#[derive(Args, Clone)]
pub struct EnsembleArgs {
    /// Ensemble size.
    #[arg(long, default_value_t = 8)]
    pub members: usize,
    /// Seed for the deterministic member generator.
    #[arg(long, default_value_t = 2026)]
    pub seed: u64,
}

impl EnsembleArgs {
    pub fn to_spec(&self, smoothness: f64) -> EnsembleSpec {
        EnsembleSpec::new(self.members, self.seed, smoothness)
    }
}

/// Parse the `--q` flag: a finite index or `inf`.
pub fn parse_q(raw: &str) -> Result<QIndex> {
    if raw.eq_ignore_ascii_case("inf") || raw == "∞" {
        return Ok(QIndex::Infinity);
    }
    raw.parse::<f64>()
        .map(QIndex::Finite)
        .map_err(|_| Error::InvalidParameter {
            name: "q",
            message: format!("expected a number or `inf`, got `{raw}`"),
        })
}

/// Parse a comma-separated list of reals.
pub fn parse_f64_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
                name: "list",
                message: format!("bad number `{}` in list", s.trim()),
            })
        })
        .collect()
}

/// Parse a comma-separated list of point indices.
pub fn parse_u32_list(raw: &str) -> Result<Vec<u32>> {
    raw.split(',')
        .map(|s| {
            s.trim().parse::<u32>().map_err(|_| Error::InvalidParameter {
                name: "indices",
                message: format!("bad index `{}` in list", s.trim()),
            })
        })
        .collect()
}

pub fn load_space(path: &PathBuf) -> Result<Arc<PointCloudSpace>> {
    metric_besov::io::read_space(path)
}

/// Wrap a report in the reproducibility envelope and write it to `--out`
/// or stdout.
pub fn emit(
    command: &str,
    params: serde_json::Value,
    report: serde_json::Value,
    out: Option<&PathBuf>,
) -> Result<()> {
    let envelope = serde_json::json!({
        "version": VERSION,
        "command": command,
        "params": params,
        "report": report,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&envelope)?);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Space(cmd) => spaces::run(cmd),
        Command::Besov(cmd) => analysis::run_besov(cmd),
        Command::Whitney(cmd) => analysis::run_whitney(cmd),
        Command::Trace(cmd) => analysis::run_trace(cmd),
        Command::Kernel(cmd) => operators::run_kernel(cmd),
        Command::Calculus(cmd) => operators::run_calculus(cmd),
        Command::Interp(cmd) => operators::run_interp(cmd),
        Command::Report(cmd) => reports::run(cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; anything else is an
            // ordinary usage error (exit 1; 2 is reserved for refusals).
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_hypothesis_violation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
