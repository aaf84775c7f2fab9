//! `kernel`, `calculus` and `interp` subcommands.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use metric_besov::aoi::{
    bessel_kernel, fractional_derivative, kernel_bound_checks, potential, potential_norm,
    size_bound_slope,
};
use metric_besov::interp::{
    calderon_decomposition, decomposition_bound_check, interpolation_norm_k,
    interpolation_theorem_harness, k_curve, psi_calibration, smoothing_candidates, NormedPair,
    SplitWitness,
};
use metric_besov::io::{read_function, read_kernel_cache, write_function, write_kernel_cache};
use metric_besov::quad::LogGrid;
use metric_besov::Result;

use crate::spaces::load_space_and_embedding;
use crate::{emit, load_space, parse_f64_list, parse_q, ConfigArgs, EnsembleArgs};

// ───────────────────────── kernel ─────────────────────────

#[derive(Subcommand)]
pub enum KernelCmd {
    /// Assemble the smoothing kernel and optionally cache it.
    Build(KernelBuildArgs),
    /// Measure the subset moment bounds of a kernel.
    Check(KernelCheckArgs),
}

#[derive(Args)]
pub struct KernelBuildArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Smoothness order α of the potential.
    #[arg(long)]
    alpha: f64,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional binary cache file to write.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Optional output file for the report (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct KernelCheckArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Smoothness order α of the potential.
    #[arg(long)]
    alpha: f64,
    /// Moment exponent of the bounds.
    #[arg(long, default_value_t = 1.0)]
    qexp: f64,
    /// Comma-separated radius grid for the difference bound (default: a
    /// short geometric grid above 4·resolution).
    #[arg(long)]
    rgrid: Option<String>,
    /// Reuse a cached kernel instead of assembling one.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_kernel(cmd: KernelCmd) -> Result<()> {
    match cmd {
        KernelCmd::Build(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let kernel = bessel_kernel(&space, args.alpha, &config)?;
            if let Some(path) = &args.cache {
                write_kernel_cache(&kernel, path)?;
            }
            let slope = {
                let h = space.resolution();
                let diam = space.diameter();
                size_bound_slope(&kernel, 2.0 * h, diam / 2.0).ok()
            };
            emit(
                "kernel build",
                serde_json::json!({
                    "space": args.space, "alpha": args.alpha,
                    "tnodes": config.t_nodes, "cache": args.cache,
                }),
                serde_json::json!({
                    "quadrature_residual": kernel.quadrature_residual,
                    "max_asymmetry": kernel.max_asymmetry(),
                    "min_value": kernel.min_value(),
                    "size_bound_slope": slope,
                }),
                args.out.as_ref(),
            )
        }
        KernelCmd::Check(args) => {
            let (space, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let config = args.config.to_config();
            let kernel = match &args.cache {
                Some(path) => read_kernel_cache(path, &space, args.alpha, &config)?,
                None => bessel_kernel(&space, args.alpha, &config)?,
            };
            let r_grid = match &args.rgrid {
                Some(list) => parse_f64_list(list)?,
                None => {
                    let h = space.resolution();
                    (0..5).map(|i| 4.0 * h * 1.5f64.powi(i)).collect()
                }
            };
            let report = kernel_bound_checks(&kernel, &embedding, args.qexp, &r_grid)?;
            emit(
                "kernel check",
                serde_json::json!({
                    "space": args.space, "subset": args.subset, "alpha": args.alpha,
                    "qexp": args.qexp, "rgrid": r_grid,
                }),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
    }
}

// ───────────────────────── calculus ─────────────────────────

#[derive(Subcommand)]
pub enum CalculusCmd {
    /// Apply the fractional derivative to a sampled function.
    Dalpha(ApplyArgs),
    /// Apply the smoothing potential to a sampled function.
    Jalpha(ApplyArgs),
    /// The potential-space norm of a sampled function.
    Pnorm(PnormArgs),
}

#[derive(Args)]
pub struct ApplyArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file.
    #[arg(long)]
    function: PathBuf,
    /// Smoothness order α.
    #[arg(long)]
    alpha: f64,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV for the transformed function.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct PnormArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file.
    #[arg(long)]
    function: PathBuf,
    /// Smoothness order α.
    #[arg(long)]
    alpha: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_calculus(cmd: CalculusCmd) -> Result<()> {
    match cmd {
        CalculusCmd::Dalpha(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let df = fractional_derivative(&space, &f, args.alpha, &config)?;
            write_function(&df, &args.out)?;
            emit(
                "calculus dalpha",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "out": args.out,
                }),
                serde_json::json!({"l2_norm": df.lp_norm(2.0)?}),
                None,
            )
        }
        CalculusCmd::Jalpha(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let kernel = bessel_kernel(&space, args.alpha, &config)?;
            let jf = potential(&kernel, &f)?;
            write_function(&jf, &args.out)?;
            emit(
                "calculus jalpha",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "out": args.out,
                }),
                serde_json::json!({
                    "l2_norm": jf.lp_norm(2.0)?,
                    "kernel_residual": kernel.quadrature_residual,
                }),
                None,
            )
        }
        CalculusCmd::Pnorm(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let norm = potential_norm(&space, &f, args.alpha, args.p, &config)?;
            emit(
                "calculus pnorm",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "p": args.p,
                }),
                serde_json::json!({"potential_norm": norm}),
                args.out.as_ref(),
            )
        }
    }
}

// ───────────────────────── interp ─────────────────────────

#[derive(Subcommand)]
pub enum InterpCmd {
    /// Sample the K-functional estimate of a function over a parameter
    /// grid; writes CSV `t,K,witness_s`.
    Kcurve(KcurveArgs),
    /// Upper estimate of the interpolated norm of a function.
    Knorm(KnormArgs),
    /// Ensemble harness comparing smoothness norms against interpolated
    /// norms.
    Harness(InterpHarnessArgs),
    /// Scale decomposition of a function with measured piece/tail bounds.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
pub struct InterpGridArgs {
    /// Lower end of the K-parameter grid.
    #[arg(long, default_value_t = 1e-3)]
    kmin: f64,
    /// Upper end of the K-parameter grid.
    #[arg(long, default_value_t = 1e3)]
    kmax: f64,
    /// Node count of the K-parameter grid.
    #[arg(long, default_value_t = 80)]
    knodes: usize,
    /// Node count of the smoothing-candidate scale grid.
    #[arg(long, default_value_t = 10)]
    snodes: usize,
}

impl InterpGridArgs {
    fn k_grid(&self) -> Result<LogGrid> {
        LogGrid::new(self.kmin, self.kmax, self.knodes)
    }

    fn s_grid(&self, space: &metric_besov::space::PointCloudSpace) -> Result<Vec<f64>> {
        Ok(LogGrid::new(space.resolution(), space.diameter(), self.snodes)?.points())
    }
}

#[derive(Args)]
pub struct KcurveArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file.
    #[arg(long)]
    function: PathBuf,
    /// Lower smoothness order of the couple.
    #[arg(long)]
    alpha: f64,
    /// Upper smoothness order of the couple.
    #[arg(long)]
    beta: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    grids: InterpGridArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct KnormArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file.
    #[arg(long)]
    function: PathBuf,
    /// Lower smoothness order of the couple.
    #[arg(long)]
    alpha: f64,
    /// Upper smoothness order of the couple.
    #[arg(long)]
    beta: f64,
    /// Interpolation parameter θ.
    #[arg(long)]
    theta: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scale-aggregation index (number or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
    #[command(flatten)]
    grids: InterpGridArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InterpHarnessArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Lower smoothness order of the couple.
    #[arg(long)]
    alpha: f64,
    /// Upper smoothness order of the couple.
    #[arg(long)]
    beta: f64,
    /// Interpolation parameter θ.
    #[arg(long)]
    theta: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scale-aggregation index (number or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file.
    #[arg(long)]
    function: PathBuf,
    /// Smoothness order for the measured bounds.
    #[arg(long)]
    alpha: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Node count of the decomposition scale grid on [resolution, 1].
    #[arg(long, default_value_t = 12)]
    dnodes: usize,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn witness_label(w: SplitWitness) -> String {
    match w {
        SplitWitness::Zero => "zero".into(),
        SplitWitness::Identity => "identity".into(),
        SplitWitness::Smoothing(s) => format!("{s}"),
    }
}

pub fn run_interp(cmd: InterpCmd) -> Result<()> {
    match cmd {
        InterpCmd::Kcurve(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let pair =
                NormedPair::potential_pair(&space, args.alpha, args.beta, args.p, &config)?;
            let smoothed = smoothing_candidates(&f, &args.grids.s_grid(&space)?)?;
            let curve = k_curve(&pair, &f, &smoothed, &args.grids.k_grid()?)?;
            curve.verify_shape()?;
            let mut csv = String::from("t,K,witness_s\n");
            for ((&t, &k), &w) in curve
                .t_grid
                .iter()
                .zip(&curve.values)
                .zip(&curve.witnesses)
            {
                csv.push_str(&format!("{t},{k},{}\n", witness_label(w)));
            }
            std::fs::write(&args.out, csv)?;
            emit(
                "interp kcurve",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "beta": args.beta, "p": args.p,
                    "out": args.out,
                }),
                serde_json::json!({
                    "points": curve.t_grid.len(),
                    "knee_spanned": curve.knee_spanned(),
                }),
                None,
            )
        }
        InterpCmd::Knorm(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let q = parse_q(&args.q)?;
            let pair =
                NormedPair::potential_pair(&space, args.alpha, args.beta, args.p, &config)?;
            let smoothed = smoothing_candidates(&f, &args.grids.s_grid(&space)?)?;
            let estimate = interpolation_norm_k(
                &pair,
                &f,
                args.theta,
                q,
                &args.grids.k_grid()?,
                &smoothed,
            )?;
            emit(
                "interp knorm",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "beta": args.beta, "theta": args.theta,
                    "p": args.p, "q": args.q,
                }),
                serde_json::to_value(&estimate)?,
                args.out.as_ref(),
            )
        }
        InterpCmd::Harness(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let q = parse_q(&args.q)?;
            let gamma = (1.0 - args.theta) * args.alpha + args.theta * args.beta;
            let spec = args.ensemble.to_spec(gamma);
            let report = interpolation_theorem_harness(
                &space, args.alpha, args.beta, args.theta, args.p, q, &spec, &config,
            )?;
            emit(
                "interp harness",
                serde_json::json!({
                    "space": args.space, "alpha": args.alpha, "beta": args.beta,
                    "theta": args.theta, "p": args.p, "q": args.q,
                    "members": spec.members, "seed": spec.seed,
                }),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
        InterpCmd::Decompose(args) => {
            let space = load_space(&args.space)?;
            let config = args.config.to_config();
            let f = read_function(&args.function, &space)?;
            let grid = LogGrid::new(space.resolution(), 1.0, args.dnodes)?;
            let calibration = psi_calibration(&space, &grid, &config)?;
            let decomposition =
                calderon_decomposition(&space, &f, &grid, calibration.c_psi, &config)?;
            let bounds = decomposition_bound_check(
                &space,
                &f,
                args.alpha,
                args.p,
                &grid,
                calibration.c_psi,
                &config,
            )?;
            emit(
                "interp decompose",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "p": args.p, "dnodes": args.dnodes,
                }),
                serde_json::json!({
                    "c_psi": calibration.c_psi,
                    "calibration_residual": calibration.relative_residual,
                    "reconstruction_residual": decomposition.reconstruction_residual,
                    "bounds": serde_json::to_value(&bounds)?,
                }),
                args.out.as_ref(),
            )
        }
    }
}
