//! `report` subcommands: the versioned document schema and the bundled
//! deterministic demo run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand};
use metric_besov::aoi::{bessel_kernel, q_modulus_ratio_sweep, size_bound_slope, CalculusConfig};
use metric_besov::besov::QIndex;
use metric_besov::ensemble::{seeded_noise, EnsembleSpec};
use metric_besov::generators::{grid_space, grid_with_bottom_edge, sierpinski_gasket};
use metric_besov::interp::{
    decomposition_bound_check, interpolation_theorem_harness, k_curve, psi_calibration,
    smoothing_candidates, NormedPair, SplitWitness,
};
use metric_besov::quad::LogGrid;
use metric_besov::space::{
    estimate_regularity, quotient_exponent, MuRule, PointCloudSpace, RegularityParams,
    SubsetEmbedding,
};
use metric_besov::trace::{extension_harness, restriction_harness};
use metric_besov::whitney::{partition_of_unity, whitney_cover};
use metric_besov::{Error, Result};

use crate::{emit, VERSION};

/// Version of the report document layout (bumped when any field changes).
pub const SCHEMA_VERSION: &str = "1";

#[derive(Subcommand)]
pub enum ReportCmd {
    /// Print the versioned schema of every report document the tool emits.
    Schema(SchemaArgs),
    /// Run a small deterministic demo of every pipeline and write the
    /// reports into a directory.
    All(AllArgs),
}

#[derive(Args)]
pub struct SchemaArgs {
    /// Optional output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AllArgs {
    /// Directory the bundle is written into (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed for every ensemble in the bundle.
    #[arg(long, default_value_t = 2026)]
    seed: u64,
}

pub fn run(cmd: ReportCmd) -> Result<()> {
    match cmd {
        ReportCmd::Schema(args) => run_schema(&args),
        ReportCmd::All(args) => run_all(&args),
    }
}

// ───────────────────────── schema ─────────────────────────

fn schema_document() -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "library_version": VERSION,
        "envelope": {
            "version": "string — library version that produced the document",
            "command": "string — the subcommand that ran",
            "params": "object — full echo of the effective parameters",
            "report": "object — one of the report documents below",
        },
        "reports": {
            "RegularityReport": {
                "fitted_exponent": "number — aggregated log–log slope",
                "r_range": "[number, number] — radius window of the fit",
                "max_rel_deviation": "number — worst relative deviation of a sampled growth curve from its own power law",
                "per_point_slopes": "array<number> — least-squares slope per sampled point",
                "sample": "array<integer> — sampled point indices",
                "truncation_diameter": "number — diameter of the fitted (possibly truncated) space",
            },
            "TraceReport": {
                "lp_ratio_max": "number — largest ‖Ef‖_p/‖f‖_p over the ensemble",
                "besov_ratio_max": "number — largest smoothness-norm ratio over the ensemble",
                "recovery_radii": "array<number> — averaging radii, coarsest first",
                "recovery_deviations": "array<array<number>> — per radius, per subset point: mean Lebesgue-average deviation",
                "recovery_improved_fraction": "number — fraction of subset points whose deviation shrinks from the coarsest to the finest radius",
                "params": {
                    "alpha": "number", "beta": "number", "p": "number",
                    "q": "number or \"Infinity\"", "gamma": "number",
                },
            },
            "RestrictReport": {
                "radii": "array<number> — averaging radii, strictly decreasing",
                "averages": "array<array<number|null>> — per subset position, per radius",
                "skipped": "array<[integer, number]> — (position, radius) pairs with empty balls",
                "max_last_increment": "number — largest final Cauchy increment",
            },
            "RestrictionTheoremReport": {
                "alpha": "number", "beta": "number", "p": "number",
                "ambient_exponent": "number", "subset_exponent": "number",
                "inequality1_max": "number — largest subset p-mass over ambient p-norm",
                "inequality2_sup": "number — largest normalized averaged-difference integral",
                "inequality2_curve": "array<[number, number]> — (radius, ensemble mean)",
                "inequality2_slope": "number — fitted log–log slope of the curve",
                "slope_target": "number — βp, the slope the bound predicts",
                "end_to_end_max": "number — largest subset-to-ambient smoothness-norm ratio",
            },
            "KernelBoundReport": {
                "ambient_exponent": "number", "subset_exponent": "number",
                "q_exp": "number — moment exponent",
                "moment_window": "[number, number] — window that must contain the subset exponent",
                "moment_per_z": "array<[integer, number]> — sampled point and its q-th moment over the subset",
                "moment_max": "number",
                "difference_window": "[number, number]",
                "difference_curve": "array<[number, number]> — (radius, mean difference moment)",
                "difference_slope": "number",
                "difference_target_slope": "number",
            },
            "DecompositionBoundReport": {
                "alpha": "number", "p": "number", "c_psi": "number",
                "piece_ratios": "array<[number, number]> — (scale, piece-bound ratio)",
                "piece_ratio_sup": "number",
                "tail_ratio": "number",
                "smoothing_bound_ratios": "array<[number, number]> — (scale, smoothing-bound ratio)",
                "smoothing_bound_sup": "number",
            },
            "InterpolationReport": {
                "alpha": "number", "beta": "number", "theta": "number", "gamma": "number",
                "p": "number", "q": "number or \"Infinity\"",
                "members_used": "integer",
                "besov_over_k": "[number, number] — (min, max) over members",
                "j_over_besov": "[number, number] — (min, max) over members",
                "knee_missed": "integer",
                "c_psi": "number",
            },
            "KNormEstimate": {
                "value": "number",
                "label": "string — always \"upper estimate\"",
                "knee_spanned": "boolean",
            },
        },
        "csv": {
            "KCurve": "columns t,K,witness_s — witness is `zero`, `identity` or the smoothing scale",
            "Function": "columns point_id,value",
            "RecoveryCurve": "columns r,mean_deviation",
        },
    })
}

fn run_schema(args: &SchemaArgs) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(&schema_document())?);
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ───────────────────────── demo bundle ─────────────────────────

/// One-dimensional segment `[0.25, 0.75]` inside a unit-interval grid,
/// carrying the parent measure (a full-dimensional subset).
fn segment_subset(space: &Arc<PointCloudSpace>) -> Result<SubsetEmbedding> {
    let indices: Vec<u32> = (0..space.len() as u32)
        .filter(|&i| {
            space
                .coord(i as usize)
                .is_some_and(|c| (0.25..=0.75).contains(&c[0]))
        })
        .collect();
    SubsetEmbedding::with_rule(Arc::clone(space), indices, MuRule::ParentMeasure)
}

fn path_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn run_all(args: &AllArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let dir = args.out.as_path();
    let seed = args.seed;
    let config = CalculusConfig::default();

    // Shared spaces.
    let line5 = grid_space(1, 5)?; // 33 points on [0,1]
    let line6 = grid_space(1, 6)?; // 65 points on [0,1]
    let plane = grid_with_bottom_edge(5)?; // 33×33 grid with its bottom edge

    // Geometry: regularity exponents and a measure-quotient exponent.
    let gasket = sierpinski_gasket(5)?;
    let line_params = RegularityParams::for_space(&line5)?;
    let gasket_params = RegularityParams::for_space(&gasket)?;
    let plane_params = RegularityParams::for_space(plane.parent())?;
    emit(
        "report all/geometry",
        serde_json::json!({"seed": seed}),
        serde_json::json!({
            "line_level5": serde_json::to_value(estimate_regularity(&line5, &line_params)?)?,
            "gasket_level5": serde_json::to_value(estimate_regularity(&gasket, &gasket_params)?)?,
            "bottom_edge_quotient":
                serde_json::to_value(quotient_exponent(&plane, &plane_params)?)?,
        }),
        Some(&path_in(dir, "geometry.json")),
    )?;

    // Whitney cover and partition of the plane's bottom edge.
    let cover = whitney_cover(plane.parent(), plane.indices(), plane.parent().diameter())?;
    let pou = partition_of_unity(&cover)?;
    let mut band_points = 0usize;
    let mut worst_sum_dev = 0.0f64;
    for x in 0..plane.parent().len() {
        let d = cover.dist_to_f()[x];
        if d > 0.0 && d < cover.scale_unit() / 2.0 {
            band_points += 1;
            worst_sum_dev = worst_sum_dev.max((pou.sum_at(x) - 1.0).abs());
        }
    }
    emit(
        "report all/whitney",
        serde_json::json!({"seed": seed}),
        serde_json::json!({
            "ball_count": cover.balls.len(),
            "overlap_bound": cover.overlap_bound,
            "support_size": pou.support_size(),
            "band_points": band_points,
            "worst_partition_sum_deviation": worst_sum_dev,
        }),
        Some(&path_in(dir, "whitney.json")),
    )?;

    // Extension harness across the bottom edge, plus the recovery curve.
    let edge = plane.clone().with_gamma(1.0);
    let spec = EnsembleSpec::new(4, seed, 0.3);
    let trace_report = extension_harness(&edge, 0.3, 2.0, QIndex::Finite(2.0), &spec, None)?;
    let mut recovery_csv = String::from("r,mean_deviation\n");
    for (r, e) in trace_report.mean_recovery_errors() {
        recovery_csv.push_str(&format!("{r},{e}\n"));
    }
    std::fs::write(path_in(dir, "recovery.csv"), recovery_csv)?;
    emit(
        "report all/extension",
        serde_json::json!({
            "seed": seed, "beta": 0.3, "p": 2.0, "q": 2.0, "members": 4,
        }),
        serde_json::to_value(&trace_report)?,
        Some(&path_in(dir, "extension.json")),
    )?;

    // Smoothing kernel on the interval.  The α=0.3 integrand has a slow
    // head, so widen the quadrature window beyond the default.
    let kernel_config = CalculusConfig {
        t_min: 1e-5,
        t_max: 1e4,
        t_nodes: 300,
        ..CalculusConfig::default()
    };
    let kernel = bessel_kernel(&line5, 0.3, &kernel_config)?;
    let h = line5.resolution();
    let slope = size_bound_slope(&kernel, 2.0 * h, line5.diameter() / 2.0)?;
    emit(
        "report all/kernel",
        serde_json::json!({
            "seed": seed, "alpha": 0.3, "tmin": kernel_config.t_min,
            "tmax": kernel_config.t_max, "tnodes": kernel_config.t_nodes,
        }),
        serde_json::json!({
            "quadrature_residual": kernel.quadrature_residual,
            "max_asymmetry": kernel.max_asymmetry(),
            "min_value": kernel.min_value(),
            "size_bound_slope": slope,
        }),
        Some(&path_in(dir, "kernel.json")),
    )?;

    // Calculus: modulus comparison sweep and decomposition bounds on noise.
    let noise = seeded_noise(&line5, seed)?;
    let ts: Vec<f64> = (0..6).map(|i| h * 1.6f64.powi(i)).collect();
    let sweep = q_modulus_ratio_sweep(&line5, &noise, &ts, 2.0, &config)?;
    let dgrid = LogGrid::new(h, 1.0, 10)?;
    let calibration = psi_calibration(&line5, &dgrid, &config)?;
    let bounds =
        decomposition_bound_check(&line5, &noise, 0.3, 2.0, &dgrid, calibration.c_psi, &config)?;
    emit(
        "report all/calculus",
        serde_json::json!({"seed": seed, "alpha": 0.3, "p": 2.0}),
        serde_json::json!({
            "modulus_ratio_sweep": sweep,
            "c_psi": calibration.c_psi,
            "calibration_residual": calibration.relative_residual,
            "decomposition_bounds": serde_json::to_value(&bounds)?,
        }),
        Some(&path_in(dir, "calculus.json")),
    )?;

    // K-curve of the noise sample between two potential orders.
    let pair = NormedPair::potential_pair(&line5, 0.2, 0.4, 2.0, &config)?;
    let s_grid = LogGrid::new(h, line5.diameter(), 8)?.points();
    let smoothed = smoothing_candidates(&noise, &s_grid)?;
    let curve = k_curve(&pair, &noise, &smoothed, &LogGrid::new(1e-3, 1e3, 40)?)?;
    curve.verify_shape()?;
    let mut kcurve_csv = String::from("t,K,witness_s\n");
    for ((&t, &k), &w) in curve.t_grid.iter().zip(&curve.values).zip(&curve.witnesses) {
        let label = match w {
            SplitWitness::Zero => "zero".to_string(),
            SplitWitness::Identity => "identity".to_string(),
            SplitWitness::Smoothing(s) => format!("{s}"),
        };
        kcurve_csv.push_str(&format!("{t},{k},{label}\n"));
    }
    std::fs::write(path_in(dir, "kcurve.csv"), kcurve_csv)?;

    // Interpolation harness on the interval.
    let interp_spec = EnsembleSpec::new(4, seed, 0.3);
    let interp_report = interpolation_theorem_harness(
        &line5,
        0.2,
        0.4,
        0.5,
        2.0,
        QIndex::Finite(2.0),
        &interp_spec,
        &config,
    )?;
    emit(
        "report all/interp",
        serde_json::json!({
            "seed": seed, "alpha": 0.2, "beta": 0.4, "theta": 0.5,
            "p": 2.0, "q": 2.0, "members": 4,
        }),
        serde_json::to_value(&interp_report)?,
        Some(&path_in(dir, "interp.json")),
    )?;

    // Restriction harness on a segment of a finer interval.
    let segment = segment_subset(&line6)?;
    let kernel6 = bessel_kernel(&line6, 0.3, &config)?;
    let h6 = line6.resolution();
    let r_grid: Vec<f64> = (0..5).map(|i| 4.0 * h6 * 1.6f64.powi(i)).collect();
    let restriction_spec = EnsembleSpec::new(4, seed, 0.3);
    let restriction_report = restriction_harness(
        &kernel6,
        &segment,
        2.0,
        QIndex::Finite(2.0),
        &restriction_spec,
        &r_grid,
        &config,
    )?;
    emit(
        "report all/restriction",
        serde_json::json!({"seed": seed, "alpha": 0.3, "p": 2.0, "q": 2.0, "members": 4}),
        serde_json::to_value(&restriction_report)?,
        Some(&path_in(dir, "restriction.json")),
    )?;

    // Manifest last, listing every artifact in emission order.
    let files = [
        "geometry.json",
        "whitney.json",
        "extension.json",
        "recovery.csv",
        "kernel.json",
        "calculus.json",
        "interp.json",
        "kcurve.csv",
        "restriction.json",
    ];
    for name in files {
        if !path_in(dir, name).exists() {
            return Err(Error::ConstructionInvariant(format!(
                "demo bundle failed to write {name}"
            )));
        }
    }
    emit(
        "report all",
        serde_json::json!({"seed": seed}),
        serde_json::json!({"schema_version": SCHEMA_VERSION, "files": files}),
        Some(&path_in(dir, "manifest.json")),
    )?;
    println!("wrote {} files to {}", files.len() + 1, dir.display());
    Ok(())
}
