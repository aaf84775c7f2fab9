//! Real-interpolation machinery between two function norms: K- and
//! J-functionals, interpolated norms, a scale decomposition built from the
//! smoothing calculus, and the harnesses that compare interpolated norms
//! against smoothness norms.
//!
//! The K-functional estimator restricts the splitting `f = g + h` to the
//! family `{g = S_s f}` over a scale grid, together with the endpoint
//! splittings `g = 0` and `g = f`.  Each candidate contributes the affine
//! function `t ↦ ‖g‖_X + t‖f − g‖_Y`, and the estimate is their pointwise
//! minimum, so it is an **upper bound** on the true K-functional that is
//! exactly nondecreasing and concave in `t`.  Every value carries the
//! "upper estimate" label.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aoi::{
    apply_smoothing, fractional_derivative_operator, potential_norm_with, q_operator,
    CalculusConfig,
};
use crate::besov::{besov_norm, modulus_of_continuity, BesovParams, DiscreteFunction, QIndex};
use crate::ensemble::{build_ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::quad::LogGrid;
use crate::space::PointCloudSpace;

/// A pair of norms on the same function carrier, the two ends of an
/// interpolation couple.
pub struct NormedPair {
    norm_x: Box<dyn Fn(&DiscreteFunction) -> Result<f64>>,
    norm_y: Box<dyn Fn(&DiscreteFunction) -> Result<f64>>,
    /// Human-readable description of the couple.
    pub label: String,
}

impl NormedPair {
    /// Couple from two norm evaluators.
    pub fn new(
        norm_x: Box<dyn Fn(&DiscreteFunction) -> Result<f64>>,
        norm_y: Box<dyn Fn(&DiscreteFunction) -> Result<f64>>,
        label: impl Into<String>,
    ) -> Self {
        NormedPair {
            norm_x,
            norm_y,
            label: label.into(),
        }
    }

    /// The degenerate couple `X = Y = L^p`; its interpolated norms have
    /// closed forms, which makes it the oracle for the quadrature path.
    pub fn lebesgue(p: f64) -> Self {
        NormedPair::new(
            Box::new(move |f| f.lp_norm(p)),
            Box::new(move |f| f.lp_norm(p)),
            format!("(L^{p}, L^{p})"),
        )
    }

    /// The couple of two potential-space norms `‖f + D_α f‖_p` and
    /// `‖f + D_β f‖_p` on a fixed space.  Both difference operators are
    /// assembled once up front.
    pub fn potential_pair(
        space: &Arc<PointCloudSpace>,
        alpha: f64,
        beta: f64,
        p: f64,
        config: &CalculusConfig,
    ) -> Result<Self> {
        let op_a = fractional_derivative_operator(space, alpha, config)?;
        let op_b = fractional_derivative_operator(space, beta, config)?;
        let cfg_a = config.clone();
        let cfg_b = config.clone();
        Ok(NormedPair::new(
            Box::new(move |f| potential_norm_with(&op_a, f, p, &cfg_a)),
            Box::new(move |f| potential_norm_with(&op_b, f, p, &cfg_b)),
            format!("(potential α={alpha}, potential β={beta}; p={p})"),
        ))
    }

    /// Evaluate the first norm.
    pub fn norm_x(&self, f: &DiscreteFunction) -> Result<f64> {
        (self.norm_x)(f)
    }

    /// Evaluate the second norm.
    pub fn norm_y(&self, f: &DiscreteFunction) -> Result<f64> {
        (self.norm_y)(f)
    }
}

impl std::fmt::Debug for NormedPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormedPair")
            .field("label", &self.label)
            .finish()
    }
}

/// Which splitting produced a K-functional value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitWitness {
    /// `g = 0`: all of `f` on the `Y` side.
    Zero,
    /// `g = f`: all of `f` on the `X` side.
    Identity,
    /// `g = S_s f` at the recorded scale.
    Smoothing(f64),
}

/// Precomputed affine family `t ↦ a + t·b` for the K-functional estimate:
/// one `(a, b) = (‖g‖_X, ‖f − g‖_Y)` per candidate splitting.
#[derive(Debug, Clone)]
pub struct KFamily {
    items: Vec<(f64, f64, SplitWitness)>,
}

impl KFamily {
    /// Evaluate the estimate at `t`: the minimum over the family, with the
    /// witness and the slope of the chosen affine piece.
    pub fn evaluate(&self, t: f64) -> Result<(f64, SplitWitness, f64)> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!("K-functional parameter must be positive, got {t}"),
            });
        }
        let mut best = f64::INFINITY;
        let mut witness = SplitWitness::Zero;
        let mut slope = 0.0;
        for &(a, b, w) in &self.items {
            let v = a + t * b;
            if v < best {
                best = v;
                witness = w;
                slope = b;
            }
        }
        if !best.is_finite() {
            return Err(Error::EmptyInput("K-functional candidate family"));
        }
        Ok((best, witness, slope))
    }
}

/// Smoothing candidates `{S_s f}` over a scale grid, tagged with their
/// scales.  Scales outside the operator's admissible window are rejected by
/// the smoothing call itself.
pub fn smoothing_candidates(
    f: &DiscreteFunction,
    s_grid: &[f64],
) -> Result<Vec<(SplitWitness, DiscreteFunction)>> {
    let space = f.space();
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let g = apply_smoothing(space, s, f)?;
        out.push((SplitWitness::Smoothing(s), g));
    }
    Ok(out)
}

/// Build the affine family for `f`: the supplied smoothing candidates plus
/// the endpoint splittings `g = 0` and `g = f`.
pub fn k_family(
    pair: &NormedPair,
    f: &DiscreteFunction,
    smoothed: &[(SplitWitness, DiscreteFunction)],
) -> Result<KFamily> {
    let mut items = Vec::with_capacity(smoothed.len() + 2);
    items.push((0.0, pair.norm_y(f)?, SplitWitness::Zero));
    items.push((pair.norm_x(f)?, 0.0, SplitWitness::Identity));
    for (w, g) in smoothed {
        let a = pair.norm_x(g)?;
        let h = f.add(&g.scale(-1.0)?)?;
        let b = pair.norm_y(&h)?;
        items.push((a, b, *w));
    }
    Ok(KFamily { items })
}

/// One-shot K-functional estimate at a single `t`; an upper bound on the
/// true infimum by construction.
pub fn k_functional(
    pair: &NormedPair,
    f: &DiscreteFunction,
    t: f64,
    smoothed: &[(SplitWitness, DiscreteFunction)],
) -> Result<(f64, SplitWitness)> {
    let family = k_family(pair, f, smoothed)?;
    let (v, w, _) = family.evaluate(t)?;
    Ok((v, w))
}

/// The J-functional `max(‖f‖_X, t·‖f‖_Y)`; exact, no infimum involved.
pub fn j_functional(pair: &NormedPair, f: &DiscreteFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("J-functional parameter must be positive, got {t}"),
        });
    }
    Ok(pair.norm_x(f)?.max(t * pair.norm_y(f)?))
}

/// A K-functional estimate sampled over a scale grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KCurve {
    /// Sample parameters, increasing.
    pub t_grid: Vec<f64>,
    /// Estimates `K̂(t)`, one per parameter.
    pub values: Vec<f64>,
    /// The splitting that attained each minimum.
    pub witnesses: Vec<SplitWitness>,
    /// Slope of the chosen affine piece at each parameter.
    pub slopes: Vec<f64>,
}

impl KCurve {
    /// Exhaustively certify the exact shape guarantees: nonnegative values,
    /// nondecreasing in `t`, and nonincreasing chosen slopes (the discrete
    /// certificate of concavity for a minimum of affine functions).
    pub fn verify_shape(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::ConstructionInvariant(format!(
                    "K estimate at grid point {i} is negative: {v}"
                )));
            }
        }
        for i in 1..self.values.len() {
            if self.values[i] < self.values[i - 1] {
                return Err(Error::ConstructionInvariant(format!(
                    "K estimate decreased between grid points {} and {i}",
                    i - 1
                )));
            }
            if self.slopes[i] > self.slopes[i - 1] {
                return Err(Error::ConstructionInvariant(format!(
                    "chosen slope increased between grid points {} and {i}; the curve is not concave",
                    i - 1
                )));
            }
        }
        Ok(())
    }

    /// Whether the grid captured the transition of the curve: the chosen
    /// splitting differs between the two grid ends.  When it does not, the
    /// curve is a single affine piece over the whole grid and the
    /// interesting knee lies outside.
    pub fn knee_spanned(&self) -> bool {
        match (self.witnesses.first(), self.witnesses.last()) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        }
    }
}

/// Sample the K-functional estimate over a log grid.
pub fn k_curve(
    pair: &NormedPair,
    f: &DiscreteFunction,
    smoothed: &[(SplitWitness, DiscreteFunction)],
    t_grid: &LogGrid,
) -> Result<KCurve> {
    let family = k_family(pair, f, smoothed)?;
    let ts = t_grid.points();
    let mut values = Vec::with_capacity(ts.len());
    let mut witnesses = Vec::with_capacity(ts.len());
    let mut slopes = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (v, w, s) = family.evaluate(t)?;
        values.push(v);
        witnesses.push(w);
        slopes.push(s);
    }
    Ok(KCurve {
        t_grid: ts,
        values,
        witnesses,
        slopes,
    })
}

/// An interpolated-norm value.  The estimator upper-bounds the true
/// K-functional pointwise, so the value upper-bounds the true interpolated
/// norm; the label says so.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KNormEstimate {
    /// The quadrature value of `‖t^{−θ} K̂f(t)‖_{L^q(dt/t)}`.
    pub value: f64,
    /// Always "upper estimate": the restricted splitting family can only
    /// overshoot the true infimum.
    pub label: &'static str,
    /// Whether the grid captured the curve's transition; when `false` the
    /// quadrature window should be widened.
    pub knee_spanned: bool,
}

fn scale_norm(samples: &[f64], grid: &LogGrid, q: QIndex) -> Result<f64> {
    match q {
        QIndex::Infinity => Ok(samples.iter().copied().fold(0.0, f64::max)),
        QIndex::Finite(q) => {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "q",
                    message: format!("scale-aggregation index must lie in [1, ∞], got {q}"),
                });
            }
            let powered: Vec<f64> = if q == 2.0 {
                samples.iter().map(|v| v * v).collect()
            } else {
                samples.iter().map(|v| v.abs().powf(q)).collect()
            };
            let integral = grid.integrate(&powered)?;
            Ok(if q == 2.0 {
                integral.sqrt()
            } else {
                integral.powf(1.0 / q)
            })
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            message: format!("interpolation parameter must lie in (0,1), got {theta}"),
        });
    }
    Ok(())
}

/// Upper estimate of the interpolated norm
/// `‖f‖_{θ,q} = ‖t^{−θ} Kf(t)‖_{L^q((0,∞), dt/t)}` by log-trapezoid
/// quadrature of the K estimate over the given grid.
pub fn interpolation_norm_k(
    pair: &NormedPair,
    f: &DiscreteFunction,
    theta: f64,
    q: QIndex,
    t_grid: &LogGrid,
    smoothed: &[(SplitWitness, DiscreteFunction)],
) -> Result<KNormEstimate> {
    check_theta(theta)?;
    let curve = k_curve(pair, f, smoothed, t_grid)?;
    let samples: Vec<f64> = curve
        .t_grid
        .iter()
        .zip(&curve.values)
        .map(|(&t, &k)| t.powf(-theta) * k)
        .collect();
    let value = scale_norm(&samples, t_grid, q)?;
    Ok(KNormEstimate {
        value,
        label: "upper estimate",
        knee_spanned: curve.knee_spanned(),
    })
}

/// The same quadrature applied to the closed-form curve `min(1,t)`: the
/// constant `c(θ,q)` with `‖f‖_{θ,q} = c(θ,q)·‖f‖_X` whenever `X = Y`.
pub fn k_norm_scale(theta: f64, q: QIndex, t_grid: &LogGrid) -> Result<f64> {
    check_theta(theta)?;
    let samples: Vec<f64> = t_grid
        .points()
        .iter()
        .map(|&t| t.powf(-theta) * t.min(1.0))
        .collect();
    scale_norm(&samples, t_grid, q)
}

// ───────────────────────── scale decomposition ─────────────────────────

/// Calibration of the reproducing constant for the squared-difference
/// decomposition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsiCalibration {
    /// The constant `c_ψ` with `c_ψ^{-1} ∫ Q_t Q_t f dt/t ≈ f`.
    pub c_psi: f64,
    /// Root-mean-square relative reconstruction error of the calibration
    /// ensemble under the fitted constant.
    pub relative_residual: f64,
}

const CALIBRATION_SEED: u64 = 0x0ca1_1b5e;
const CALIBRATION_MEMBERS: usize = 6;

fn check_decomposition_grid(space: &PointCloudSpace, grid: &LogGrid) -> Result<()> {
    let h = space.resolution();
    let lo = grid.t_min;
    let hi = grid.t_max;
    if !(lo >= h * (1.0 - 1e-12) && hi <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            message: format!(
                "decomposition grid [{lo}, {hi}] must lie inside [resolution, 1] = [{h}, 1]"
            ),
        });
    }
    Ok(())
}

fn double_smoothing_difference(
    space: &Arc<PointCloudSpace>,
    grid: &LogGrid,
    config: &CalculusConfig,
    inputs: &[&[f64]],
) -> Result<Vec<Vec<Vec<f64>>>> {
    // outer: grid node; inner: input; innermost: values of Q_t(Q_t input).
    let ts = grid.points();
    let mut out = Vec::with_capacity(ts.len());
    for &t in &ts {
        let q = q_operator(space, t, config)?;
        let mut per_input = Vec::with_capacity(inputs.len());
        for &values in inputs {
            let once = q.apply(values)?;
            per_input.push(q.apply(&once)?);
        }
        out.push(per_input);
    }
    Ok(out)
}

/// Fit the reproducing constant `c_ψ` by least squares on a fixed seeded
/// noise ensemble: the value minimising the mean-square error of
/// `c_ψ^{-1} Σ w_i Q_{t_i} Q_{t_i} f` against `f` over the calibration
/// members.
pub fn psi_calibration(
    space: &Arc<PointCloudSpace>,
    t_grid: &LogGrid,
    config: &CalculusConfig,
) -> Result<PsiCalibration> {
    check_decomposition_grid(space, t_grid)?;
    let mut members = Vec::with_capacity(CALIBRATION_MEMBERS);
    for m in 0..CALIBRATION_MEMBERS {
        members.push(crate::ensemble::seeded_noise(
            space,
            CALIBRATION_SEED ^ (m as u64),
        )?);
    }
    let weights = t_grid.weights();
    let inputs: Vec<&[f64]> = members.iter().map(|f| f.values()).collect();
    let per_node = double_smoothing_difference(space, t_grid, config, &inputs)?;

    let n = space.len();
    let mut cross = 0.0;
    let mut energy = 0.0;
    let mut signal = 0.0;
    let mut reproduced: Vec<Vec<f64>> = vec![vec![0.0; n]; members.len()];
    for (node, per_input) in per_node.iter().enumerate() {
        let w = weights[node];
        for (m, piece) in per_input.iter().enumerate() {
            for (slot, &v) in reproduced[m].iter_mut().zip(piece) {
                *slot += w * v;
            }
        }
    }
    for (m, f) in members.iter().enumerate() {
        let wts = space.weights();
        for ((&b, &v), &wx) in reproduced[m].iter().zip(f.values()).zip(wts) {
            cross += b * v * wx;
            energy += b * b * wx;
            signal += v * v * wx;
        }
    }
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::QuadratureUnstable(
            "calibration produced no reproduced energy; widen the decomposition grid".into(),
        ));
    }
    let c_inv = cross / energy;
    if !(c_inv > 0.0) || !c_inv.is_finite() {
        return Err(Error::QuadratureUnstable(format!(
            "calibration constant is not positive (fit gave c⁻¹ = {c_inv})"
        )));
    }
    // residual² = Σ‖c⁻¹·Bf − f‖² / Σ‖f‖².
    let mut err = 0.0;
    for (m, f) in members.iter().enumerate() {
        let wts = space.weights();
        for ((&b, &v), &wx) in reproduced[m].iter().zip(f.values()).zip(wts) {
            let d = c_inv * b - v;
            err += d * d * wx;
        }
    }
    Ok(PsiCalibration {
        c_psi: 1.0 / c_inv,
        relative_residual: (err / signal).sqrt(),
    })
}

/// A truncated reproducing decomposition `f = Σ w_i A_{t_i} f + Af` with
/// pieces `A_t f = c_ψ^{-1} Q_t Q_t f` and the tail defined as the exact
/// remainder.
#[derive(Debug, Clone)]
pub struct CalderonDecomposition {
    /// The scale grid of the pieces.
    pub t_grid: Vec<f64>,
    /// Quadrature weights pairing with the grid (`dt/t` log-trapezoid).
    pub weights: Vec<f64>,
    /// The reproducing constant used.
    pub c_psi: f64,
    /// The pieces `A_{t_i} f`, one per grid node.
    pub pieces: Vec<DiscreteFunction>,
    /// The tail `Af = f − Σ w_i A_{t_i} f`; the reconstruction is exact by
    /// this definition.
    pub tail: DiscreteFunction,
    /// `‖Af‖₂ / ‖f‖₂`: what the truncated scales failed to reproduce
    /// (0 when `f = 0`).
    pub reconstruction_residual: f64,
}

/// Decompose `f` over the scale grid.  The grid must lie inside
/// `[resolution, 1]`; the reproducing constant comes from
/// [`psi_calibration`] (or any caller-chosen positive value).
pub fn calderon_decomposition(
    space: &Arc<PointCloudSpace>,
    f: &DiscreteFunction,
    t_grid: &LogGrid,
    c_psi: f64,
    config: &CalculusConfig,
) -> Result<CalderonDecomposition> {
    check_decomposition_grid(space, t_grid)?;
    if !(c_psi > 0.0) || !c_psi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "c_psi",
            message: format!("reproducing constant must be positive, got {c_psi}"),
        });
    }
    if f.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: f.len(),
        });
    }
    let inputs = [f.values()];
    let per_node = double_smoothing_difference(space, t_grid, config, &inputs)?;
    let weights = t_grid.weights();
    let c_inv = 1.0 / c_psi;
    let mut pieces = Vec::with_capacity(per_node.len());
    let mut partial = vec![0.0; space.len()];
    for (node, per_input) in per_node.iter().enumerate() {
        let piece: Vec<f64> = per_input[0].iter().map(|&v| c_inv * v).collect();
        for (slot, &v) in partial.iter_mut().zip(&piece) {
            *slot += weights[node] * v;
        }
        pieces.push(DiscreteFunction::new(Arc::clone(space), piece)?);
    }
    let tail_values: Vec<f64> = f
        .values()
        .iter()
        .zip(&partial)
        .map(|(&v, &s)| v - s)
        .collect();
    let tail = DiscreteFunction::new(Arc::clone(space), tail_values)?;
    let f_norm = f.lp_norm(2.0)?;
    let reconstruction_residual = if f_norm > 0.0 {
        tail.lp_norm(2.0)? / f_norm
    } else {
        0.0
    };
    Ok(CalderonDecomposition {
        t_grid: t_grid.points(),
        weights,
        c_psi,
        pieces,
        tail,
        reconstruction_residual,
    })
}

// ───────────────────────── decomposition bounds ─────────────────────────

/// Measured constants of the piece and tail bounds that license the
/// J-side interpolation argument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionBoundReport {
    /// Smoothness order of the potential norms.
    pub alpha: f64,
    /// Integrability index.
    pub p: f64,
    /// The reproducing constant used for the pieces.
    pub c_psi: f64,
    /// Per scale: `(t, ‖(I+D_α)A_t f‖_p · t^α / E_p f(4t))`; scales whose
    /// modulus is numerically zero relative to `‖f‖_p` are skipped.
    pub piece_ratios: Vec<(f64, f64)>,
    /// Largest piece ratio over the grid.
    pub piece_ratio_sup: f64,
    /// `‖(I+D_α)Af‖_p / ‖f‖_p` for the tail (0 when `f = 0`).
    pub tail_ratio: f64,
    /// Per scale: `(t, ‖D_α A_t f‖_p · t^α / ‖Q_t f‖_p)`; scales where
    /// `Q_t f` is numerically zero relative to `‖f‖_p` are skipped.
    pub smoothing_bound_ratios: Vec<(f64, f64)>,
    /// Largest smoothing-bound ratio over the grid.
    pub smoothing_bound_sup: f64,
}

/// Measure, over the decomposition grid, the bounds
/// `‖(I+D_α)A_t f‖_p ≤ C t^{−α} E_p f(4t)` and `‖(I+D_α)Af‖_p ≤ C‖f‖_p`,
/// plus the sharper per-scale bound `‖D_α A_t f‖_p ≤ C t^{−α} ‖Q_t f‖_p`.
///
/// The order must sit inside the characterization window `0 < α < α₀`:
/// outside it the potential norms the bounds are stated in are not
/// trusted, and the run is refused.
pub fn decomposition_bound_check(
    space: &Arc<PointCloudSpace>,
    f: &DiscreteFunction,
    alpha: f64,
    p: f64,
    t_grid: &LogGrid,
    c_psi: f64,
    config: &CalculusConfig,
) -> Result<DecompositionBoundReport> {
    config.validate()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("the decomposition bounds need 1 < p < ∞, got {p}"),
        });
    }
    if !(alpha > 0.0 && alpha < config.alpha_0) {
        return Err(Error::HypothesisViolation {
            requirement: format!(
                "0 < α < α₀ with α₀ = {} (got α = {})",
                config.alpha_0, alpha
            ),
            context: "potential-norm characterization window",
        });
    }
    let decomposition = calderon_decomposition(space, f, t_grid, c_psi, config)?;
    let derivative = fractional_derivative_operator(space, alpha, config)?;

    let f_norm = f.lp_norm(p)?;
    let floor = 1e-12 * f_norm;
    let mut piece_ratios = Vec::new();
    let mut smoothing_bound_ratios = Vec::new();
    let mut piece_ratio_sup = 0.0f64;
    let mut smoothing_bound_sup = 0.0f64;
    for (node, piece) in decomposition.pieces.iter().enumerate() {
        let t = decomposition.t_grid[node];
        let d_piece = derivative.apply(piece)?;
        let with_identity = piece.add(&d_piece)?.lp_norm(p)?;
        let modulus = modulus_of_continuity(f, 4.0 * t, p)?;
        if modulus > floor {
            let ratio = with_identity * t.powf(alpha) / modulus;
            piece_ratios.push((t, ratio));
            piece_ratio_sup = piece_ratio_sup.max(ratio);
        }
        let q_norm = {
            let q = q_operator(space, t, config)?;
            DiscreteFunction::new(Arc::clone(space), q.apply(f.values())?)?.lp_norm(p)?
        };
        if q_norm > floor {
            let ratio = d_piece.lp_norm(p)? * t.powf(alpha) / q_norm;
            smoothing_bound_ratios.push((t, ratio));
            smoothing_bound_sup = smoothing_bound_sup.max(ratio);
        }
    }
    let tail_ratio = if f_norm > 0.0 {
        let d_tail = derivative.apply(&decomposition.tail)?;
        decomposition.tail.add(&d_tail)?.lp_norm(p)? / f_norm
    } else {
        0.0
    };
    Ok(DecompositionBoundReport {
        alpha,
        p,
        c_psi,
        piece_ratios,
        piece_ratio_sup,
        tail_ratio,
        smoothing_bound_ratios,
        smoothing_bound_sup,
    })
}

// ───────────────────────── interpolation harness ─────────────────────────

/// Ensemble comparison of the smoothness norm `‖f‖_{B^γ_{p,q}}` against
/// the two interpolated-norm estimates built from the potential couple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationReport {
    /// Lower smoothness order of the couple.
    pub alpha: f64,
    /// Upper smoothness order of the couple.
    pub beta: f64,
    /// Interpolation parameter.
    pub theta: f64,
    /// The interpolated smoothness `γ = (1−θ)α + θβ`.
    pub gamma: f64,
    /// Integrability index.
    pub p: f64,
    /// Scale-aggregation index.
    pub q: QIndex,
    /// Ensemble members that contributed (nonzero norms).
    pub members_used: usize,
    /// `(min, max)` over members of `‖f‖_{B^γ_{p,q}} / K-estimate`.
    pub besov_over_k: (f64, f64),
    /// `(min, max)` over members of `J-estimate / ‖f‖_{B^γ_{p,q}}`.
    pub j_over_besov: (f64, f64),
    /// Members whose K-curve never changed witness inside the quadrature
    /// grid (knee not spanned).
    pub knee_missed: usize,
    /// The reproducing constant used for the J-side pieces.
    pub c_psi: f64,
}

impl InterpolationReport {
    /// Max-over-min spread of the smoothness-to-K ratios.
    pub fn k_ratio_spread(&self) -> f64 {
        if self.besov_over_k.0 > 0.0 {
            self.besov_over_k.1 / self.besov_over_k.0
        } else {
            f64::INFINITY
        }
    }

    /// Max-over-min spread of the J-to-smoothness ratios.
    pub fn j_ratio_spread(&self) -> f64 {
        if self.j_over_besov.0 > 0.0 {
            self.j_over_besov.1 / self.j_over_besov.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compare, over a seeded ensemble of smoothness `γ`, the norm
/// `‖f‖_{B^γ_{p,q}}` against (i) the K-side upper estimate of the
/// interpolated norm of the potential couple `(α, β)` and (ii) the J-side
/// upper bound assembled from the scale decomposition.
///
/// Both orders must sit inside the characterization window
/// `0 < α ≠ β < α₀`; when `α > β` the couple is swapped and `θ` replaced
/// by `1−θ`, which leaves the interpolated space unchanged.
pub fn interpolation_theorem_harness(
    space: &Arc<PointCloudSpace>,
    alpha: f64,
    beta: f64,
    theta: f64,
    p: f64,
    q: QIndex,
    spec: &EnsembleSpec,
    config: &CalculusConfig,
) -> Result<InterpolationReport> {
    config.validate()?;
    check_theta(theta)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("potential norms need 1 < p < ∞, got {p}"),
        });
    }
    let in_window = |a: f64| a > 0.0 && a < config.alpha_0;
    if !in_window(alpha) || !in_window(beta) || alpha == beta {
        return Err(Error::HypothesisViolation {
            requirement: format!(
                "0 < α ≠ β < α₀ with α₀ = {} (got α = {alpha}, β = {beta})",
                config.alpha_0
            ),
            context: "interpolation order window",
        });
    }
    // Normalise to an increasing couple; the interpolated space is the
    // same with θ reflected.
    let (alpha, beta, theta) = if alpha < beta {
        (alpha, beta, theta)
    } else {
        (beta, alpha, 1.0 - theta)
    };
    let gamma = (1.0 - theta) * alpha + theta * beta;

    let pair = NormedPair::potential_pair(space, alpha, beta, p, config)?;
    let besov_params = BesovParams { alpha: gamma, p, q };

    let h = space.resolution();
    let diam = space.diameter();
    let s_grid = LogGrid::new(h, diam, 10)?.points();
    let knorm_grid = LogGrid::new(1e-3, 1e3, 80)?;
    let decomposition_grid = LogGrid::new(h, 1.0, 12)?;
    let calibration = psi_calibration(space, &decomposition_grid, config)?;
    let exponent_gap = beta - alpha;

    let mut espec = spec.clone();
    espec.smoothness = gamma;
    let members = build_ensemble(space, &espec)?;

    let mut members_used = 0usize;
    let mut besov_over_k = (f64::INFINITY, 0.0f64);
    let mut j_over_besov = (f64::INFINITY, 0.0f64);
    let mut knee_missed = 0usize;
    for f in &members {
        let besov = besov_norm(f, &besov_params, crate::besov::NormMode::Dyadic)?;
        if besov == 0.0 {
            continue;
        }
        members_used += 1;

        let smoothed = smoothing_candidates(f, &s_grid)?;
        let k_est = interpolation_norm_k(&pair, f, theta, q, &knorm_grid, &smoothed)?;
        if !k_est.knee_spanned {
            knee_missed += 1;
        }
        if k_est.value > 0.0 {
            let r = besov / k_est.value;
            besov_over_k = (besov_over_k.0.min(r), besov_over_k.1.max(r));
        }

        let decomposition =
            calderon_decomposition(space, f, &decomposition_grid, calibration.c_psi, config)?;
        let mut samples = Vec::with_capacity(decomposition.pieces.len());
        for (node, piece) in decomposition.pieces.iter().enumerate() {
            let t = decomposition.t_grid[node];
            let j = j_functional(&pair, piece, t.powf(exponent_gap))?;
            samples.push(t.powf(-theta * exponent_gap) * j);
        }
        let j_integral = scale_norm(&samples, &decomposition_grid, q)?;
        let j_est = j_functional(&pair, &decomposition.tail, 1.0)? + j_integral;
        let r = j_est / besov;
        j_over_besov = (j_over_besov.0.min(r), j_over_besov.1.max(r));
    }
    if members_used == 0 {
        return Err(Error::EmptyInput("interpolation ensemble (all members vanish)"));
    }
    Ok(InterpolationReport {
        alpha,
        beta,
        theta,
        gamma,
        p,
        q,
        members_used,
        besov_over_k,
        j_over_besov,
        knee_missed,
        c_psi: calibration.c_psi,
    })
}
