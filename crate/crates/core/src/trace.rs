//! Extension from a subset and restriction back to it, with the ensemble
//! harnesses that measure the operator norms of both directions.
//!
//! The extension operator averages a subset function over enlarged covering
//! balls and blends the averages with the covering partition of unity:
//!
//! ```text
//! Ef(x) = Σ_i φ_i(x) · ⨍_{19·B_i} f dμ,
//! ```
//!
//! so `Ef` vanishes outside the covered neighbourhood `Ω = ∪ 6B_i`, is exact
//! on constants wherever `Σφ = 1`, never exceeds `sup |f|`, and preserves
//! positivity.  Restriction is the reverse Lebesgue-average construction: at
//! each subset point the ambient function is averaged over shrinking balls
//! with respect to the ambient measure, and the smallest-radius average is
//! returned together with the convergence evidence.  Recovery diagnostics
//! average `|Ef − f(t₀)|` over the ball *minus* the subset: the extension
//! only lives off the subset, and the model situation gives the subset
//! ambient measure zero, which the discrete weights cannot express.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aoi::{bessel_kernel, potential, BesselKernel, CalculusConfig};
use crate::besov::{besov_norm, BesovParams, DiscreteFunction, NormMode, QIndex};
use crate::ensemble::{build_ensemble, build_ensemble_with, EnsembleSpec};
use crate::error::{Error, Result};
use crate::fit;
use crate::space::{
    estimate_regularity, quotient_exponent, PointCloudSpace, RegularityParams, SubsetEmbedding,
};
use crate::whitney::{partition_of_unity, whitney_cover, PartitionOfUnity, WhitneyCover};

/// Default enlargement factor of the averaging balls relative to the
/// covering balls.
pub const DEFAULT_AVERAGING_FACTOR: f64 = 19.0;

// ───────────────────────── extension operator ─────────────────────────

/// The averaging extension operator from a subset to its ambient space.
pub struct ExtensionOperator {
    embedding: SubsetEmbedding,
    f_space: Arc<PointCloudSpace>,
    cover: WhitneyCover,
    pou: PartitionOfUnity,
    averaging_radius_factor: f64,
    band: f64,
    /// Per covering ball: subset members of the enlarged ball as
    /// `(subset position, μ-weight)`.
    cells: Vec<Vec<(u32, f64)>>,
    /// Per covering ball: `μ` mass of the enlarged ball (strictly positive).
    cell_mass: Vec<f64>,
}

impl ExtensionOperator {
    /// Build the operator.  `band` is the width of the strip
    /// `{0 < d(x,F) < band}` on which the partition sums to one (constants
    /// extend exactly there); when omitted it is chosen just past the
    /// farthest ambient point, so the cover reaches everything off the
    /// subset.
    pub fn new(embedding: SubsetEmbedding, band: Option<f64>) -> Result<Self> {
        Self::with_averaging_factor(embedding, band, DEFAULT_AVERAGING_FACTOR)
    }

    /// [`Self::new`] with an explicit averaging-ball enlargement factor
    /// (default 19); exposed for sensitivity studies.
    pub fn with_averaging_factor(
        embedding: SubsetEmbedding,
        band: Option<f64>,
        factor: f64,
    ) -> Result<Self> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "factor",
                message: format!("averaging factor must be ≥ 1, got {factor}"),
            });
        }
        let parent = Arc::clone(embedding.parent());
        let band = match band {
            Some(b) => {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "band",
                        message: format!("band width must be positive, got {b}"),
                    });
                }
                b
            }
            None => {
                let mut far = 0.0f64;
                for x in 0..parent.len() {
                    far = far.max(embedding.distance_to_subset(x)?);
                }
                if far == 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "embedding",
                        message: "subset equals the space; nothing to extend onto".into(),
                    });
                }
                far * (1.0 + 1e-6)
            }
        };
        let cover = whitney_cover(&parent, embedding.indices(), 2.0 * band)?;
        let pou = partition_of_unity(&cover)?;

        let f_pos: HashMap<u32, u32> = embedding
            .indices()
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, k as u32))
            .collect();
        let mut cells = Vec::with_capacity(cover.balls.len());
        let mut cell_mass = Vec::with_capacity(cover.balls.len());
        for (i, ball) in cover.balls.iter().enumerate() {
            let mut members = Vec::new();
            let mut mass = 0.0;
            parent.visit_ball(ball.center as usize, factor * ball.radius, |y, _| {
                if let Some(&k) = f_pos.get(&y) {
                    let mu = embedding.mu(k as usize);
                    members.push((k, mu));
                    mass += mu;
                }
            });
            if !(mass > 0.0) {
                return Err(Error::ConstructionInvariant(format!(
                    "averaging ball {i} carries no subset mass (factor {factor})"
                )));
            }
            members.sort_unstable_by_key(|&(k, _)| k);
            cells.push(members);
            cell_mass.push(mass);
        }
        let f_space = embedding.subset_space()?;
        Ok(ExtensionOperator {
            embedding,
            f_space,
            cover,
            pou,
            averaging_radius_factor: factor,
            band,
            cells,
            cell_mass,
        })
    }

    /// The subset embedding the operator extends from.
    pub fn embedding(&self) -> &SubsetEmbedding {
        &self.embedding
    }

    /// The subset materialised as a standalone space (μ as weights);
    /// subset functions are defined on this space.
    pub fn f_space(&self) -> &Arc<PointCloudSpace> {
        &self.f_space
    }

    /// The covering used by the partition of unity.
    pub fn cover(&self) -> &WhitneyCover {
        &self.cover
    }

    /// The partition of unity blending the ball averages.
    pub fn pou(&self) -> &PartitionOfUnity {
        &self.pou
    }

    /// Width of the strip on which constants extend exactly.
    pub fn band(&self) -> f64 {
        self.band
    }

    /// The enlargement factor of the averaging balls.
    pub fn averaging_radius_factor(&self) -> f64 {
        self.averaging_radius_factor
    }

    /// Per-ball μ-averages of a subset value vector.  Each average is
    /// clamped into the exact hull of its members' values, which costs
    /// nothing mathematically (a weighted mean lies in the hull) and
    /// removes the rounding overshoot that would otherwise leak past the
    /// sup bound.
    pub fn cell_averages(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.embedding.len() {
            return Err(Error::LengthMismatch {
                expected: self.embedding.len(),
                got: values.len(),
            });
        }
        Ok(self
            .cells
            .iter()
            .zip(&self.cell_mass)
            .map(|(members, &mass)| {
                let mut num = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(k, mu) in members {
                    let v = values[k as usize];
                    num += mu * v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (num / mass).clamp(lo, hi)
            })
            .collect())
    }

    /// Extend a subset function to the ambient space.
    ///
    /// Each value is a partition-weighted blend of ball averages, clamped
    /// into the hull of the participating averages and zero (the blend is a
    /// sub-convex combination, so the clamp only strips rounding noise);
    /// this makes positivity and the sup bound hold exactly.
    pub fn extend(&self, f: &DiscreteFunction) -> Result<DiscreteFunction> {
        let avgs = self.cell_averages(f.values())?;
        let parent = self.embedding.parent();
        let n = parent.len();
        let mut out = vec![0.0; n];
        for (x, slot) in out.iter_mut().enumerate() {
            let supports = self.pou.at(x);
            if supports.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            let mut lo = 0.0f64;
            let mut hi = 0.0f64;
            for &(b, phi) in supports {
                let a = avgs[b as usize];
                acc += phi * a;
                lo = lo.min(a);
                hi = hi.max(a);
            }
            *slot = acc.clamp(lo, hi);
        }
        DiscreteFunction::new(Arc::clone(parent), out)
    }
}

// ───────────────────────── restriction ─────────────────────────

/// Convergence evidence returned by [`restrict`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictReport {
    /// The averaging radii, strictly decreasing.
    pub radii: Vec<f64>,
    /// Per subset position, per radius: the ball average, or `None` where
    /// the ball held no ambient points off the subset.
    pub averages: Vec<Vec<Option<f64>>>,
    /// `(subset position, radius)` pairs that had to be skipped.
    pub skipped: Vec<(usize, f64)>,
    /// Largest final Cauchy increment `|a(r_last) − a(r_prev)|` over points
    /// where both are defined.
    pub max_last_increment: f64,
}

/// Ambient-measure ball average of `values` (or of `|values − c|` when a
/// reference `c` is given), optionally leaving out flagged points.
/// `None` when no admissible point falls in the ball.
fn ball_average(
    space: &PointCloudSpace,
    skip: Option<&[bool]>,
    values: &[f64],
    center: usize,
    r: f64,
    reference: Option<f64>,
) -> Option<f64> {
    let mut acc = 0.0;
    let mut mass = 0.0;
    space.visit_ball(center, r, |y, _| {
        let y = y as usize;
        if skip.is_some_and(|flags| flags[y]) {
            return;
        }
        let w = space.weight(y);
        let v = match reference {
            Some(c) => (values[y] - c).abs(),
            None => values[y],
        };
        acc += w * v;
        mass += w;
    });
    if mass > 0.0 {
        Some(acc / mass)
    } else {
        None
    }
}

fn subset_flags(emb: &SubsetEmbedding) -> Vec<bool> {
    let mut flags = vec![false; emb.parent().len()];
    for &i in emb.indices() {
        flags[i as usize] = true;
    }
    flags
}

fn check_restriction_radii(space: &PointCloudSpace, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("restriction radii"));
    }
    let h = space.resolution();
    let diam = space.diameter();
    for r in radii {
        if !(*r > 2.0 * h && *r < diam) {
            return Err(Error::InvalidParameter {
                name: "radii",
                message: format!(
                    "averaging radius {r} outside (2h, diameter) = ({}, {diam})",
                    2.0 * h
                ),
            });
        }
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "radii",
            message: "averaging radii must be strictly decreasing".into(),
        });
    }
    Ok(())
}

/// Restrict an ambient function to a subset by shrinking Lebesgue averages.
///
/// At every subset point the function is averaged over full ambient balls
/// of the given radii with respect to the ambient measure.  The returned
/// function holds the smallest-radius average available per point; the
/// report carries the full average sequences as convergence evidence.
pub fn restrict(
    x_fn: &DiscreteFunction,
    emb: &SubsetEmbedding,
    radii: &[f64],
) -> Result<(DiscreteFunction, RestrictReport)> {
    let parent = emb.parent();
    if x_fn.len() != parent.len() {
        return Err(Error::LengthMismatch {
            expected: parent.len(),
            got: x_fn.len(),
        });
    }
    check_restriction_radii(parent, radii)?;
    let mut averages = Vec::with_capacity(emb.len());
    let mut skipped = Vec::new();
    let mut values = Vec::with_capacity(emb.len());
    let mut max_last_increment = 0.0f64;
    for (k, &i) in emb.indices().iter().enumerate() {
        let mut per_radius = Vec::with_capacity(radii.len());
        for &r in radii {
            let avg = ball_average(parent, None, x_fn.values(), i as usize, r, None);
            if avg.is_none() {
                skipped.push((k, r));
            }
            per_radius.push(avg);
        }
        let value = per_radius
            .iter()
            .rev()
            .flatten()
            .next()
            .copied()
            .ok_or(Error::IsolatedPoint {
                index: i as usize,
                scale: *radii.last().unwrap(),
            })?;
        if per_radius.len() >= 2 {
            if let (Some(a), Some(b)) = (
                per_radius[per_radius.len() - 1],
                per_radius[per_radius.len() - 2],
            ) {
                max_last_increment = max_last_increment.max((a - b).abs());
            }
        }
        values.push(value);
        averages.push(per_radius);
    }
    let f = DiscreteFunction::new(emb.subset_space()?, values)?;
    Ok((
        f,
        RestrictReport {
            radii: radii.to_vec(),
            averages,
            skipped,
            max_last_increment,
        },
    ))
}

// ───────────────────────── extension harness ─────────────────────────

/// Parameter tuple a [`TraceReport`] was measured at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceParams {
    /// Ambient smoothness `α = β + γ/p`.
    pub alpha: f64,
    /// Subset smoothness `β`.
    pub beta: f64,
    /// Integrability index.
    pub p: f64,
    /// Scale-aggregation index.
    pub q: QIndex,
    /// Quotient exponent `γ` between the two measures.
    pub gamma: f64,
}

/// Measured operator constants of the extension over a seeded ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceReport {
    /// Largest `‖Ef‖_{p,m} / ‖f‖_{p,μ}` over the ensemble.
    pub lp_ratio_max: f64,
    /// Largest smoothness-norm ratio (ambient `α`-norm of `Ef` over subset
    /// `β`-norm of `f`).
    pub besov_ratio_max: f64,
    /// The deviation radii, coarsest first.
    pub recovery_radii: Vec<f64>,
    /// Per radius, per subset point: ensemble-mean Lebesgue-average
    /// deviation `⨍_{B(t₀,r)∖F} |Ef − f(t₀)| dm` (0 where no data).
    pub recovery_deviations: Vec<Vec<f64>>,
    /// Fraction of subset points whose ensemble-mean deviation at the
    /// finest radius improves on the coarsest one.
    pub recovery_improved_fraction: f64,
    /// The parameters the ratios were measured at.
    pub params: TraceParams,
}

impl TraceReport {
    /// Per radius: deviation averaged over subset points as well.
    pub fn mean_recovery_errors(&self) -> Vec<(f64, f64)> {
        self.recovery_radii
            .iter()
            .zip(&self.recovery_deviations)
            .map(|(&r, devs)| {
                let mean = if devs.is_empty() {
                    0.0
                } else {
                    devs.iter().sum::<f64>() / devs.len() as f64
                };
                (r, mean)
            })
            .collect()
    }
}

fn resolved_gamma(emb: &SubsetEmbedding) -> Result<f64> {
    if let Some(g) = emb.gamma() {
        return Ok(g);
    }
    let params = RegularityParams::for_space(emb.parent())?;
    Ok(quotient_exponent(emb, &params)?.fitted_exponent)
}

/// Recovery radii `[32h, 16h, 8h, 4h]` for an ambient resolution `h`.
pub fn recovery_radii(space: &PointCloudSpace) -> Result<Vec<f64>> {
    let h = space.resolution();
    let radii: Vec<f64> = [32.0, 16.0, 8.0, 4.0].iter().map(|f| f * h).collect();
    if radii[0] >= space.diameter() {
        return Err(Error::InvalidParameter {
            name: "space",
            message: format!(
                "recovery radii need 32h < diameter; got 32h = {} on diameter {}",
                radii[0],
                space.diameter()
            ),
        });
    }
    Ok(radii)
}

/// Measure the extension operator's `L^p` and smoothness-norm constants,
/// plus pointwise recovery quality, over a seeded function ensemble on the
/// subset.
///
/// Refuses subset smoothness outside the window `0 < β < 1 − γ/p` the
/// extension theorem requires; the ambient norm is taken at
/// `α = β + γ/p`.
pub fn extension_harness(
    emb: &SubsetEmbedding,
    beta: f64,
    p: f64,
    q: QIndex,
    spec: &EnsembleSpec,
    band: Option<f64>,
) -> Result<TraceReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("integrability index must lie in [1, ∞), got {p}"),
        });
    }
    let gamma = resolved_gamma(emb)?;
    if !(gamma > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "quotient exponent must be positive, got {gamma}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0 - gamma / p) {
        return Err(Error::HypothesisViolation {
            requirement: format!(
                "0 < β < 1 − γ/p (β = {beta}, γ = {gamma:.4}, p = {p} ⇒ upper limit {:.4})",
                1.0 - gamma / p
            ),
            context: "extension smoothness window",
        });
    }
    let alpha = beta + gamma / p;

    let op = ExtensionOperator::new(emb.clone(), band)?;
    let f_space = Arc::clone(op.f_space());
    let smoothing = bessel_kernel(&f_space, beta, &CalculusConfig::default())?;
    let smoother = move |g: &DiscreteFunction| potential(&smoothing, g);
    let mut espec = spec.clone();
    espec.smoothness = beta;
    let members = build_ensemble_with(&f_space, &espec, Some(&smoother))?;

    let parent = emb.parent();
    let radii = recovery_radii(parent)?;
    let in_subset = subset_flags(emb);

    let sub_params = BesovParams { alpha: beta, p, q };
    let amb_params = BesovParams { alpha, p, q };

    let mut lp_ratio_max = 0.0f64;
    let mut besov_ratio_max = 0.0f64;
    let mut dev_sums = vec![vec![0.0f64; emb.len()]; radii.len()];
    let mut dev_counts = vec![vec![0usize; emb.len()]; radii.len()];

    for f in &members {
        let f_norm = f.lp_norm(p)?;
        if f_norm == 0.0 {
            continue;
        }
        let ef = op.extend(f)?;
        lp_ratio_max = lp_ratio_max.max(ef.lp_norm(p)? / f_norm);

        let sub_norm = besov_norm(f, &sub_params, NormMode::Dyadic)?;
        let amb_norm = besov_norm(&ef, &amb_params, NormMode::Dyadic)?;
        if sub_norm > 0.0 {
            besov_ratio_max = besov_ratio_max.max(amb_norm / sub_norm);
        }

        for (k, &i) in emb.indices().iter().enumerate() {
            let target = f.value(k);
            for (j, &r) in radii.iter().enumerate() {
                let dev = ball_average(
                    parent,
                    Some(&in_subset),
                    ef.values(),
                    i as usize,
                    r,
                    Some(target),
                );
                if let Some(d) = dev {
                    dev_sums[j][k] += d;
                    dev_counts[j][k] += 1;
                }
            }
        }
    }

    let recovery_deviations: Vec<Vec<f64>> = dev_sums
        .iter()
        .zip(&dev_counts)
        .map(|(sums, counts)| {
            sums.iter()
                .zip(counts)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let coarsest = 0;
    let finest = radii.len() - 1;
    let improved = (0..emb.len())
        .filter(|&k| {
            dev_counts[coarsest][k] > 0
                && dev_counts[finest][k] > 0
                && recovery_deviations[finest][k] < recovery_deviations[coarsest][k]
        })
        .count();
    let recovery_improved_fraction = improved as f64 / emb.len().max(1) as f64;

    Ok(TraceReport {
        lp_ratio_max,
        besov_ratio_max,
        recovery_radii: radii,
        recovery_deviations,
        recovery_improved_fraction,
        params: TraceParams {
            alpha,
            beta,
            p,
            q,
            gamma,
        },
    })
}

// ───────────────────────── restriction harness ─────────────────────────

/// Measured constants of the restriction theorem's proof inequalities and
/// the end-to-end norm comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictionTheoremReport {
    /// Ambient smoothness of the potentials.
    pub alpha: f64,
    /// Subset smoothness `β = α − (N−d)/p` from the fitted exponents.
    pub beta: f64,
    /// Integrability index.
    pub p: f64,
    /// Fitted ambient growth exponent `N`.
    pub ambient_exponent: f64,
    /// Fitted subset growth exponent `d`.
    pub subset_exponent: f64,
    /// Largest `∫_F |f|^p dμ / ‖g‖_p^p` over the potential ensemble.
    pub inequality1_max: f64,
    /// Largest `I(r) / (r^{βp} ‖g‖_p^p)` over members and radii, where
    /// `I(r)` is the averaged-difference double integral.
    pub inequality2_sup: f64,
    /// Per radius: ensemble mean of `I(r)/‖g‖_p^p`.
    pub inequality2_curve: Vec<(f64, f64)>,
    /// Fitted log–log slope of the difference curve.
    pub inequality2_slope: f64,
    /// The exponent the inequality predicts: `βp`.
    pub slope_target: f64,
    /// Largest subset-to-ambient smoothness-norm ratio over a smooth
    /// ensemble restricted pointwise.
    pub end_to_end_max: f64,
}

/// Measure the restriction theorem's two proof inequalities over an
/// ensemble of potentials `f = J_α g`, and the end-to-end norm comparison
/// on a smooth ensemble.
///
/// The potential order must sit inside the characterization window
/// `0 < α < α₀` taken from the calculus configuration (the end-to-end norm
/// comparison is only licensed there), and the exponents `N` and `d` from
/// the regularity fits must give `β = α − (N−d)/p` inside `(0,1)`; runs
/// outside either window are refused.
pub fn restriction_harness(
    kernel: &BesselKernel,
    emb: &SubsetEmbedding,
    p: f64,
    q: QIndex,
    spec: &EnsembleSpec,
    r_grid: &[f64],
    config: &CalculusConfig,
) -> Result<RestrictionTheoremReport> {
    if !Arc::ptr_eq(kernel.space(), emb.parent()) {
        return Err(Error::InvalidParameter {
            name: "emb",
            message: "subset embedding must live on the kernel's space".into(),
        });
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("restriction needs 1 < p < ∞, got {p}"),
        });
    }
    config.validate()?;
    if !(kernel.alpha > 0.0 && kernel.alpha < config.alpha_0) {
        return Err(Error::HypothesisViolation {
            requirement: format!(
                "0 < α < α₀ with α₀ = {} (got α = {})",
                config.alpha_0, kernel.alpha
            ),
            context: "restriction order window",
        });
    }
    if r_grid.is_empty() {
        return Err(Error::EmptyInput("difference radius grid"));
    }
    let parent = emb.parent();
    let f_space = emb.subset_space()?;
    let h_f = f_space.resolution();
    let diam_f = f_space.diameter();
    for &r in r_grid {
        if !(r > h_f && r < diam_f) {
            return Err(Error::InvalidParameter {
                name: "r_grid",
                message: format!(
                    "difference radius {r} outside (subset spacing {h_f}, subset diameter {diam_f})"
                ),
            });
        }
    }

    let ambient_exponent =
        estimate_regularity(parent, &RegularityParams::for_space(parent)?)?.fitted_exponent;
    let subset_exponent =
        estimate_regularity(&f_space, &RegularityParams::for_space(&f_space)?)?.fitted_exponent;
    let alpha = kernel.alpha;
    let beta = alpha - (ambient_exponent - subset_exponent) / p;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::HypothesisViolation {
            requirement: format!(
                "0 < β = α − (N−d)/p < 1 (α = {alpha}, N = {ambient_exponent:.4}, d = {subset_exponent:.4}, p = {p} ⇒ β = {beta:.4})"
            ),
            context: "restriction smoothness window",
        });
    }
    let slope_target = beta * p;

    // Proof inequalities over potentials of a rough ensemble.
    let members = build_ensemble(parent, spec)?;
    let indices = emb.indices();
    let mut inequality1_max = 0.0f64;
    let mut inequality2_sup = 0.0f64;
    let mut curve_sums = vec![0.0f64; r_grid.len()];
    let mut used_members = 0usize;
    for g in &members {
        let g_norm = g.lp_norm(p)?;
        if g_norm == 0.0 {
            continue;
        }
        used_members += 1;
        let gp = g_norm.powf(p);
        let f = potential(kernel, g)?;
        let fv: Vec<f64> = indices.iter().map(|&i| f.value(i as usize)).collect();

        let mut i1 = 0.0;
        for (k, v) in fv.iter().enumerate() {
            i1 += v.abs().powf(p) * emb.mu(k);
        }
        inequality1_max = inequality1_max.max(i1 / gp);

        for (j, &r) in r_grid.iter().enumerate() {
            let mut outer = 0.0;
            for (k, &i) in indices.iter().enumerate() {
                let mut inner = 0.0;
                let mut mass = 0.0;
                for (k2, &i2) in indices.iter().enumerate() {
                    if parent.distance(i as usize, i2 as usize) < r {
                        inner += (fv[k] - fv[k2]).abs().powf(p) * emb.mu(k2);
                        mass += emb.mu(k2);
                    }
                }
                if mass > 0.0 {
                    outer += emb.mu(k) * inner / mass;
                }
            }
            curve_sums[j] += outer / gp;
            inequality2_sup = inequality2_sup.max(outer / (r.powf(slope_target) * gp));
        }
    }
    if used_members == 0 {
        return Err(Error::EmptyInput("potential ensemble (all members vanish)"));
    }
    let inequality2_curve: Vec<(f64, f64)> = r_grid
        .iter()
        .zip(&curve_sums)
        .map(|(&r, &s)| (r, s / used_members as f64))
        .collect();
    let rs: Vec<f64> = inequality2_curve.iter().map(|&(r, _)| r).collect();
    let vs: Vec<f64> = inequality2_curve.iter().map(|&(_, v)| v).collect();
    let inequality2_slope = fit::log_log_slope(&rs, &vs)?.0;

    // End-to-end norm comparison on a smooth (bump-sum only) ensemble.
    let mut smooth_spec = EnsembleSpec::new(spec.members, spec.seed ^ 0xE2E0_17, alpha);
    smooth_spec.include_indicators = false;
    smooth_spec.include_noise = false;
    let smooth_members = build_ensemble(parent, &smooth_spec)?;
    let amb_params = BesovParams { alpha, p, q };
    let sub_params = BesovParams { alpha: beta, p, q };
    let mut end_to_end_max = 0.0f64;
    for f in &smooth_members {
        let amb_norm = besov_norm(f, &amb_params, NormMode::Dyadic)?;
        if amb_norm == 0.0 {
            continue;
        }
        let fv: Vec<f64> = indices.iter().map(|&i| f.value(i as usize)).collect();
        let f_sub = DiscreteFunction::new(Arc::clone(&f_space), fv)?;
        let sub_norm = besov_norm(&f_sub, &sub_params, NormMode::Dyadic)?;
        end_to_end_max = end_to_end_max.max(sub_norm / amb_norm);
    }

    Ok(RestrictionTheoremReport {
        alpha,
        beta,
        p,
        ambient_exponent,
        subset_exponent,
        inequality1_max,
        inequality2_sup,
        inequality2_curve,
        inequality2_slope,
        slope_target,
        end_to_end_max,
    })
}

// ───────────────────────── dyadic Hardy inequality ─────────────────────────

/// Evaluate both sides of the dyadic Hardy inequality
/// `Σ_n 2^{-na} (Σ_{k≤n} b_k)^γ ≤ C · Σ_n 2^{-na} b_n^γ`
/// for a finite nonnegative sequence; returns `(lhs, rhs, ratio)` with the
/// ratio defined as 0 when both sides vanish.
pub fn hardy_inequality_check(b: &[f64], a: f64, gamma_exp: f64) -> Result<(f64, f64, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a",
            message: format!("decay exponent must be positive, got {a}"),
        });
    }
    if !(gamma_exp > 0.0 && gamma_exp.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma_exp",
            message: format!("power must be positive, got {gamma_exp}"),
        });
    }
    for (n, &v) in b.iter().enumerate() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                message: format!("sequence entry {n} must be nonnegative and finite, got {v}"),
            });
        }
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut partial = 0.0;
    for (n, &v) in b.iter().enumerate() {
        partial += v;
        let w = (2.0f64).powf(-(n as f64) * a);
        lhs += w * partial.powf(gamma_exp);
        rhs += w * v.powf(gamma_exp);
    }
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok((lhs, rhs, ratio))
}
