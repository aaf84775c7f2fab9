//! `besov`, `whitney` and `trace` subcommands.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use metric_besov::besov::{
    besov_norm, besov_profile, besov_seminorm, BesovParams, NormMode,
};
use metric_besov::io::{read_function, write_function};
use metric_besov::trace::{
    extension_harness, restrict, restriction_harness, ExtensionOperator,
};
use metric_besov::whitney::{partition_of_unity, whitney_cover};
use metric_besov::Result;

use crate::spaces::load_space_and_embedding;
use crate::{emit, load_space, parse_f64_list, parse_q, ConfigArgs, EnsembleArgs};

// ───────────────────────── besov ─────────────────────────

#[derive(Subcommand)]
pub enum BesovCmd {
    /// Smoothness norm and seminorm of a sampled function.
    Norm(NormArgs),
    /// Scale profile `t ↦ E_p f(t)` of a sampled function.
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Dyadic,
    Quadrature,
}

impl Mode {
    fn to_norm_mode(self) -> NormMode {
        match self {
            Mode::Dyadic => NormMode::Dyadic,
            Mode::Quadrature => NormMode::Quadrature,
        }
    }
}

#[derive(Args)]
pub struct NormArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file (`point_id,value`).
    #[arg(long)]
    function: PathBuf,
    /// Smoothness order.
    #[arg(long)]
    alpha: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scale-aggregation index (number or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
    /// Scale discretisation of the norm.
    #[arg(long, value_enum, default_value_t = Mode::Dyadic)]
    mode: Mode,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ProfileArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Function CSV file (`point_id,value`).
    #[arg(long)]
    function: PathBuf,
    /// Oscillation index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Explicit comma-separated scales (default: dyadic halvings from
    /// diameter/2 down to the resolution floor).
    #[arg(long)]
    scales: Option<String>,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_besov(cmd: BesovCmd) -> Result<()> {
    match cmd {
        BesovCmd::Norm(args) => {
            let space = load_space(&args.space)?;
            let f = read_function(&args.function, &space)?;
            let q = parse_q(&args.q)?;
            let params = BesovParams {
                alpha: args.alpha,
                p: args.p,
                q,
            };
            let mode = args.mode.to_norm_mode();
            let norm = besov_norm(&f, &params, mode)?;
            let seminorm = besov_seminorm(&f, &params, mode)?;
            emit(
                "besov norm",
                serde_json::json!({
                    "space": args.space, "function": args.function,
                    "alpha": args.alpha, "p": args.p, "q": args.q,
                }),
                serde_json::json!({"norm": norm, "seminorm": seminorm}),
                args.out.as_ref(),
            )
        }
        BesovCmd::Profile(args) => {
            let space = load_space(&args.space)?;
            let f = read_function(&args.function, &space)?;
            let scales = match &args.scales {
                Some(list) => parse_f64_list(list)?,
                None => dyadic_scales(&space),
            };
            let profile = besov_profile(&f, args.p, &scales)?;
            let rows: Vec<serde_json::Value> = profile
                .scales
                .iter()
                .zip(&profile.moduli)
                .map(|(&t, &e)| serde_json::json!({"t": t, "E": e}))
                .collect();
            emit(
                "besov profile",
                serde_json::json!({
                    "space": args.space, "function": args.function, "p": args.p,
                }),
                serde_json::json!({"profile": rows}),
                args.out.as_ref(),
            )
        }
    }
}

/// Dyadic halvings from half the diameter down to (but excluding) the
/// modulus floor at the resolution.
pub fn dyadic_scales(space: &metric_besov::space::PointCloudSpace) -> Vec<f64> {
    let mut scales = Vec::new();
    let mut t = space.diameter() / 2.0;
    while t > space.resolution() * 1.5 {
        scales.push(t);
        t /= 2.0;
    }
    scales
}

// ───────────────────────── whitney ─────────────────────────

#[derive(Subcommand)]
pub enum WhitneyCmd {
    /// Build a verified cover of the complement of a subset and summarise
    /// it (with its partition of unity).
    Cover(CoverArgs),
}

#[derive(Args)]
pub struct CoverArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Scale unit (the cover spans distances up to half of it); defaults
    /// to the space diameter.
    #[arg(long)]
    scale_unit: Option<f64>,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_whitney(cmd: WhitneyCmd) -> Result<()> {
    match cmd {
        WhitneyCmd::Cover(args) => {
            let (space, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let scale_unit = args.scale_unit.unwrap_or_else(|| space.diameter());
            let cover = whitney_cover(&space, embedding.indices(), scale_unit)?;
            let balls: Vec<serde_json::Value> = cover
                .balls
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "center": b.center, "radius": b.radius, "layer": b.layer,
                    })
                })
                .collect();
            let partition = if cover.is_empty() {
                serde_json::Value::Null
            } else {
                let pou = partition_of_unity(&cover)?;
                serde_json::json!({"support_size": pou.support_size()})
            };
            emit(
                "whitney cover",
                serde_json::json!({
                    "space": args.space, "subset": args.subset, "scale_unit": scale_unit,
                }),
                serde_json::json!({
                    "ball_count": cover.balls.len(),
                    "overlap_bound": cover.overlap_bound,
                    "empty": cover.is_empty(),
                    "balls": balls,
                    "partition": partition,
                }),
                args.out.as_ref(),
            )
        }
    }
}

// ───────────────────────── trace ─────────────────────────

#[derive(Subcommand)]
pub enum TraceCmd {
    /// Extend a function on the subset to the whole space.
    Extend(ExtendArgs),
    /// Restrict a function on the space to the subset by shrinking ball
    /// averages.
    Restrict(RestrictArgs),
    /// Ensemble harness of the extension operator: norm ratios and
    /// recovery errors.
    Harness(HarnessArgs),
    /// Ensemble harness of the restriction inequalities.
    RestrictionHarness(RestrictionArgs),
}

#[derive(Args)]
pub struct ExtendArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Function CSV on the subset points (ids `0..subset_len`).
    #[arg(long)]
    function: PathBuf,
    /// Cover band width (default: spans every off-subset point).
    #[arg(long)]
    band: Option<f64>,
    /// Output CSV for the extended function.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct RestrictArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Function CSV on the parent space.
    #[arg(long)]
    function: PathBuf,
    /// Strictly decreasing comma-separated averaging radii.
    #[arg(long)]
    radii: String,
    /// Output CSV for the restricted function.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON report file (stdout otherwise).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
pub struct HarnessArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Subset smoothness order β.
    #[arg(long)]
    beta: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scale-aggregation index (number or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
    /// Cover band width (default: spans every off-subset point).
    #[arg(long)]
    band: Option<f64>,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RestrictionArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Ambient smoothness order α.
    #[arg(long)]
    alpha: f64,
    /// Integrability index.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scale-aggregation index (number or `inf`).
    #[arg(long, default_value = "2")]
    q: String,
    /// Comma-separated radius grid for the difference inequality (default:
    /// a short geometric grid above 4·resolution).
    #[arg(long)]
    rgrid: Option<String>,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_trace(cmd: TraceCmd) -> Result<()> {
    match cmd {
        TraceCmd::Extend(args) => {
            let (_, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let op = ExtensionOperator::new(embedding, args.band)?;
            let f = read_function(&args.function, op.f_space())?;
            let extended = op.extend(&f)?;
            write_function(&extended, &args.out)?;
            emit(
                "trace extend",
                serde_json::json!({
                    "space": args.space, "subset": args.subset,
                    "function": args.function, "band": op.band(), "out": args.out,
                }),
                serde_json::json!({
                    "cover_balls": op.cover().balls.len(),
                    "overlap_bound": op.cover().overlap_bound,
                }),
                None,
            )
        }
        TraceCmd::Restrict(args) => {
            let (space, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let f = read_function(&args.function, &space)?;
            let radii = parse_f64_list(&args.radii)?;
            let (restricted, report) = restrict(&f, &embedding, &radii)?;
            write_function(&restricted, &args.out)?;
            emit(
                "trace restrict",
                serde_json::json!({
                    "space": args.space, "subset": args.subset,
                    "function": args.function, "radii": radii, "out": args.out,
                }),
                serde_json::to_value(&report)?,
                args.report.as_ref(),
            )
        }
        TraceCmd::Harness(args) => {
            let (_, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let q = parse_q(&args.q)?;
            let spec = args.ensemble.to_spec(args.beta);
            let report = extension_harness(&embedding, args.beta, args.p, q, &spec, args.band)?;
            emit(
                "trace harness",
                serde_json::json!({
                    "space": args.space, "subset": args.subset, "beta": args.beta,
                    "p": args.p, "q": args.q,
                    "members": spec.members, "seed": spec.seed,
                }),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
        TraceCmd::RestrictionHarness(args) => {
            let (space, embedding) = load_space_and_embedding(&args.space, &args.subset)?;
            let q = parse_q(&args.q)?;
            let config = args.config.to_config();
            let spec = args.ensemble.to_spec(args.alpha);
            let r_grid = match &args.rgrid {
                Some(list) => parse_f64_list(list)?,
                None => {
                    let h = space.resolution();
                    (0..5).map(|i| 4.0 * h * 1.5f64.powi(i)).collect()
                }
            };
            let kernel = metric_besov::aoi::bessel_kernel(&space, args.alpha, &config)?;
            let report =
                restriction_harness(&kernel, &embedding, args.p, q, &spec, &r_grid, &config)?;
            emit(
                "trace restriction-harness",
                serde_json::json!({
                    "space": args.space, "subset": args.subset, "alpha": args.alpha,
                    "p": args.p, "q": args.q,
                    "members": spec.members, "seed": spec.seed, "rgrid": r_grid,
                }),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
    }
}
