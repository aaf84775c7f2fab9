//! `space` subcommands: construction, subset description, scaling fits and
//! ball queries.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use metric_besov::generators::{
    axis_slice, cantor_set, dilated_gasket, grid_space, product_space, sierpinski_gasket,
};
use metric_besov::io::{read_space, read_subset, write_space, write_subset, SubsetFile};
use metric_besov::space::{
    estimate_regularity, quotient_exponent, RegularityParams, SubsetEmbedding,
};
use metric_besov::{Error, Result};

use crate::{emit, load_space, parse_u32_list};

#[derive(Subcommand)]
pub enum SpaceCmd {
    /// Generate a reference geometry and write its JSON description.
    Build(BuildArgs),
    /// Form the product of two spaces; writes the product space and the
    /// embedding of the first factor as a slice.
    Product(ProductArgs),
    /// Describe a subset of a space (by explicit indices or an axis slice).
    Subset(SubsetArgs),
    /// Fit the ball-growth exponent of a space.
    Regularity(RegularityArgs),
    /// Fit the ball-quotient exponent of a subset inside its parent.
    Quotient(QuotientArgs),
    /// List the points of a metric ball.
    Query(QueryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Grid,
    Gasket,
    DilatedGasket,
    Cantor,
}

#[derive(Args)]
pub struct BuildArgs {
    /// Geometry family.
    #[arg(long, value_enum)]
    kind: Kind,
    /// Refinement level.
    #[arg(long)]
    level: u32,
    /// Grid dimension (grid only).
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Number of dilations (dilated-gasket only).
    #[arg(long, default_value_t = 2)]
    count: u32,
    /// Output space JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ProductArgs {
    /// First factor (the subset-carrying one).
    #[arg(long)]
    left: PathBuf,
    /// Second factor.
    #[arg(long)]
    right: PathBuf,
    /// Output space JSON file for the product.
    #[arg(long)]
    out: PathBuf,
    /// Optional output subset JSON for the embedded first factor.
    #[arg(long)]
    subset_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SubsetArgs {
    /// Parent space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Explicit comma-separated parent indices.
    #[arg(long)]
    indices: Option<String>,
    /// Slice axis (coordinate spaces only): keep points whose `axis`
    /// coordinate equals `value`.
    #[arg(long)]
    axis: Option<usize>,
    /// Slice value.
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    /// Measure rule for the subset.
    #[arg(long, default_value = "lower-dimensional-cell")]
    mu_rule: String,
    /// Known scaling exponent of the subset measure, if any.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output subset JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct RegularityArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct QuotientArgs {
    /// Parent space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Subset JSON file.
    #[arg(long)]
    subset: PathBuf,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct QueryArgs {
    /// Space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Centre point index.
    #[arg(long)]
    center: usize,
    /// Ball radius.
    #[arg(long)]
    radius: f64,
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cmd: SpaceCmd) -> Result<()> {
    match cmd {
        SpaceCmd::Build(args) => {
            let space = match args.kind {
                Kind::Grid => grid_space(args.dim, args.level)?,
                Kind::Gasket => sierpinski_gasket(args.level)?,
                Kind::DilatedGasket => dilated_gasket(args.level, args.count)?,
                Kind::Cantor => cantor_set(args.level)?,
            };
            write_space(&space, &args.out)?;
            emit(
                "space build",
                serde_json::json!({
                    "level": args.level, "dim": args.dim, "count": args.count,
                    "out": args.out,
                }),
                serde_json::json!({
                    "points": space.len(),
                    "resolution": space.resolution(),
                    "diameter": space.diameter(),
                    "total_measure": space.total_measure(),
                    "content_hash": space.content_hash(),
                }),
                None,
            )
        }
        SpaceCmd::Product(args) => {
            let left = read_space(&args.left)?;
            let right = read_space(&args.right)?;
            let (product, embedding) = product_space(&left, &right)?;
            write_space(&product, &args.out)?;
            if let Some(path) = &args.subset_out {
                write_subset(&embedding, path)?;
            }
            emit(
                "space product",
                serde_json::json!({"left": args.left, "right": args.right, "out": args.out}),
                serde_json::json!({
                    "points": product.len(),
                    "resolution": product.resolution(),
                    "diameter": product.diameter(),
                    "subset_points": embedding.len(),
                    "content_hash": product.content_hash(),
                }),
                None,
            )
        }
        SpaceCmd::Subset(args) => {
            let space = load_space(&args.space)?;
            let indices = match (&args.indices, args.axis) {
                (Some(list), None) => parse_u32_list(list)?,
                (None, Some(axis)) => axis_slice(&space, axis, args.value)?,
                _ => {
                    return Err(Error::InvalidParameter {
                        name: "indices",
                        message: "give exactly one of --indices or --axis".into(),
                    })
                }
            };
            let file = SubsetFile {
                indices,
                mu: None,
                mu_rule: Some(args.mu_rule.clone()),
                gamma: args.gamma,
            };
            // Validate before writing.
            let embedding = file.clone().into_embedding(&space)?;
            std::fs::write(&args.out, format!("{}\n", serde_json::to_string_pretty(&file)?))?;
            emit(
                "space subset",
                serde_json::json!({
                    "space": args.space, "mu_rule": args.mu_rule, "gamma": args.gamma,
                    "out": args.out,
                }),
                serde_json::json!({
                    "subset_points": embedding.len(),
                    "mu_total": embedding.mu_total(),
                }),
                None,
            )
        }
        SpaceCmd::Regularity(args) => {
            let space = load_space(&args.space)?;
            let report = estimate_regularity(&space, &RegularityParams::for_space(&space)?)?;
            emit(
                "space regularity",
                serde_json::json!({"space": args.space}),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
        SpaceCmd::Quotient(args) => {
            let space = load_space(&args.space)?;
            let embedding = read_subset(&args.subset, &space)?;
            let report = quotient_exponent(&embedding, &RegularityParams::for_space(&space)?)?;
            emit(
                "space quotient",
                serde_json::json!({"space": args.space, "subset": args.subset}),
                serde_json::to_value(&report)?,
                args.out.as_ref(),
            )
        }
        SpaceCmd::Query(args) => {
            let space = load_space(&args.space)?;
            let ids = space.ball(args.center, args.radius)?;
            let measure = space.measure(&ids)?;
            emit(
                "space query",
                serde_json::json!({
                    "space": args.space, "center": args.center, "radius": args.radius,
                }),
                serde_json::json!({"ids": ids, "count": ids.len(), "measure": measure}),
                args.out.as_ref(),
            )
        }
    }
}

/// Load a space and a subset embedding over it from CLI paths (shared by
/// other command groups).
pub fn load_space_and_embedding(
    space: &PathBuf,
    subset: &PathBuf,
) -> Result<(Arc<metric_besov::space::PointCloudSpace>, SubsetEmbedding)> {
    let parent = load_space(space)?;
    let embedding = read_subset(subset, &parent)?;
    Ok((parent, embedding))
}
