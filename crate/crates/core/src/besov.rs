//! Smoothness measurement: the p-modulus of continuity, Besov-type norms in
//! continuous (quadrature) and dyadic forms, and a slope diagnostic that
//! estimates the largest smoothness exponent a sampled function exhibits.
//!
//! The central quantity is
//!
//! ```text
//! E_p f(t) = ( Σ_x w_x · (1/m(B(x,t))) Σ_{y ∈ B(x,t)} |f(y) − f(x)|^p w_y )^{1/p}
//! ```
//!
//! an average oscillation of `f` at scale `t`.  Norms weigh `t^{-α} E_p f(t)`
//! across scales, either by a log-trapezoid quadrature over `[h, 1]` or by
//! the dyadic sum over `t = 2^{-k}`.  Balls are open and always contain their
//! centre, so the inner average is well defined.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::LogGrid;
use crate::space::{Lattice, Metric, PointCloudSpace};

/// A real-valued function sampled on the points of a space.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    space: Arc<PointCloudSpace>,
    values: Vec<f64>,
}

impl DiscreteFunction {
    /// Pair `values` with the space they live on.  Values must be finite and
    /// one per point.
    pub fn new(space: Arc<PointCloudSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                message: format!("non-finite value at point {bad}"),
            });
        }
        Ok(DiscreteFunction { space, values })
    }

    /// The space the function is sampled on.
    pub fn space(&self) -> &Arc<PointCloudSpace> {
        &self.space
    }

    /// All values, indexed by point.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at one point.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the space is empty.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weighted `L^p` norm `(Σ_x w_x |f(x)|^p)^{1/p}`, `p ≥ 1`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        let w = self.space.weights();
        let mut acc = 0.0;
        if p == 1.0 {
            for (v, wx) in self.values.iter().zip(w) {
                acc += v.abs() * wx;
            }
            return Ok(acc);
        }
        if p == 2.0 {
            for (v, wx) in self.values.iter().zip(w) {
                acc += v * v * wx;
            }
            return Ok(acc.sqrt());
        }
        for (v, wx) in self.values.iter().zip(w) {
            acc += v.abs().powf(p) * wx;
        }
        Ok(acc.powf(1.0 / p))
    }

    /// Pointwise sum with another function on the same space.
    pub fn add(&self, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        DiscreteFunction::new(Arc::clone(&self.space), values)
    }

    /// Pointwise scaling by a finite factor.
    pub fn scale(&self, factor: f64) -> Result<DiscreteFunction> {
        let values = self.values.iter().map(|v| v * factor).collect();
        DiscreteFunction::new(Arc::clone(&self.space), values)
    }
}

/// Smoothness / integrability indices for a Besov-type norm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BesovParams {
    /// Smoothness exponent, in `(0, 1)`.
    pub alpha: f64,
    /// Oscillation integrability index, in `[1, ∞)`.
    pub p: f64,
    /// Scale integrability index.
    pub q: QIndex,
}

/// The `q` index of a Besov norm: finite, or the sup-over-scales variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QIndex {
    /// `q ∈ [1, ∞)`: scales enter through an `L^q(dt/t)` aggregate.
    Finite(f64),
    /// `q = ∞`: scales enter through a supremum.
    Infinity,
}

impl BesovParams {
    /// Check the index ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("smoothness exponent must lie in (0,1), got {}", self.alpha),
            });
        }
        check_p(self.p)?;
        if let QIndex::Finite(q) = self.q {
            if !(q >= 1.0 && q.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "q",
                    message: format!("scale index must lie in [1,∞], got {q}"),
                });
            }
        }
        Ok(())
    }
}

/// How a Besov norm aggregates scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMode {
    /// Sum over dyadic scales `t = 2^{-k}`, `k ≥ 1`, truncated at `2^{-k} ≥ h`.
    Dyadic,
    /// Log-trapezoid quadrature of the scale integral over `[h, 1]`.
    Quadrature,
}

/// A sampled scale profile `t ↦ E_p f(t)` (scales strictly decreasing).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BesovProfile {
    /// Scales, strictly decreasing.
    pub scales: Vec<f64>,
    /// Modulus values `E_p f(t)`, one per scale, nonnegative.
    pub moduli: Vec<f64>,
    /// The oscillation index the profile was computed with.
    pub p: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("integrability index must lie in [1,∞), got {p}"),
        });
    }
    Ok(())
}

/// The p-modulus of continuity `E_p f(t)`.
///
/// Computes the measure-weighted average of `|f(y) − f(x)|^p` over `y` in the
/// open ball `B(x, t)`, integrates over `x`, and takes the `1/p` root.  For
/// `t` at or below the space resolution every ball is a singleton and the
/// result is exactly zero.
pub fn modulus_of_continuity(f: &DiscreteFunction, t: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("scale must be positive and finite, got {t}"),
        });
    }
    let space = f.space().as_ref();
    // Below the resolution every open ball is a singleton: exactly zero, and
    // the guard keeps the prefix-sum fast path's rounding floor out of what
    // should be a hard zero.
    if is_constant(&f.values) || t <= space.resolution() {
        return Ok(0.0);
    }
    if p == 2.0 && space.lattice().is_some() && matches!(space.metric(), Metric::Euclidean { .. })
    {
        return Ok(modulus_lattice_p2(space, &f.values, t));
    }
    Ok(modulus_generic(space, &f.values, t, p))
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Direct evaluation via ball enumeration; any metric, any `p`.
fn modulus_generic(space: &PointCloudSpace, values: &[f64], t: f64, p: f64) -> f64 {
    let w = space.weights();
    let mut acc = 0.0;
    for x in 0..space.len() {
        let fx = values[x];
        let mut inner = 0.0;
        let mut mass = 0.0;
        space.visit_ball(x, t, |y, _d2| {
            let diff = (values[y as usize] - fx).abs();
            let contrib = if p == 1.0 {
                diff
            } else if p == 2.0 {
                diff * diff
            } else {
                diff.powf(p)
            };
            inner += contrib * w[y as usize];
            mass += w[y as usize];
        });
        acc += w[x] * inner / mass;
    }
    if p == 1.0 {
        acc
    } else if p == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / p)
    }
}

/// `p = 2` evaluation on exact-lattice spaces in time `O(n · t/h)` instead of
/// `O(n · (t/h)^dim)`.
///
/// Expands `|f(y) − f(x)|²` and reads the three ball sums `Σ w`, `Σ w f`,
/// `Σ w f²` off per-row prefix arrays: within one row, ball membership is a
/// contiguous column interval, and its half-width depends only on the row
/// pair, not on the centre.  The membership predicate mirrors the ball
/// enumeration bit for bit on dyadic lattices (integer column differences
/// times a power-of-two pitch square exactly), so the two paths see the same
/// point sets.  Values are mean-centred first to tame cancellation in the
/// expanded square.
fn modulus_lattice_p2(space: &PointCloudSpace, values: &[f64], t: f64) -> f64 {
    let lat: &Lattice = space.lattice().expect("caller checked lattice");
    let w = space.weights();
    let h = lat.pitch;
    let r2 = t * t;
    let planar = space.dim() == Some(2);

    // Mean-centre: differences are unchanged, cancellation shrinks.
    let total: f64 = space.total_measure();
    let mean: f64 = values.iter().zip(w).map(|(v, wx)| v * wx).sum::<f64>() / total;
    let g: Vec<f64> = values.iter().map(|v| v - mean).collect();

    // Per-row prefix sums of w, w·g, w·g² over the column-sorted entries.
    let nrows = lat.rows.len();
    let mut pw = Vec::with_capacity(nrows);
    let mut pwg = Vec::with_capacity(nrows);
    let mut pwg2 = Vec::with_capacity(nrows);
    let mut row_y = Vec::with_capacity(nrows);
    for row in &lat.rows {
        let mut a = Vec::with_capacity(row.len() + 1);
        let mut b = Vec::with_capacity(row.len() + 1);
        let mut c = Vec::with_capacity(row.len() + 1);
        a.push(0.0);
        b.push(0.0);
        c.push(0.0);
        for &(_, id) in row {
            let id = id as usize;
            a.push(a.last().unwrap() + w[id]);
            b.push(b.last().unwrap() + w[id] * g[id]);
            c.push(c.last().unwrap() + w[id] * g[id] * g[id]);
        }
        pw.push(a);
        pwg.push(b);
        pwg2.push(c);
        let rep = row[0].1 as usize;
        row_y.push(if planar {
            space.coord(rep).expect("euclidean lattice has coords")[1]
        } else {
            0.0
        });
    }

    // Largest admissible column offset for a given squared row gap, found by
    // the exact ball predicate (monotone in the offset).
    let max_col_offset = |dy2: f64| -> Option<i64> {
        if !(dy2 < r2) {
            return None;
        }
        let mut lo = 0i64; // predicate holds: dc = 0 gives dy2 < r2
        let mut hi = (t / h).ceil() as i64 + 2; // predicate fails: (hi·h)² ≥ t²
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let dx = mid as f64 * h;
            if dx * dx + dy2 < r2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };

    let mut acc = 0.0;
    let mut s0 = Vec::new();
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for (ra, row_a) in lat.rows.iter().enumerate() {
        let wa = row_a.len();
        s0.clear();
        s1.clear();
        s2.clear();
        s0.resize(wa, 0.0);
        s1.resize(wa, 0.0);
        s2.resize(wa, 0.0);
        for rb in 0..nrows {
            let dy = row_y[ra] - row_y[rb];
            let dy2 = dy * dy;
            let Some(a_max) = max_col_offset(dy2) else {
                continue;
            };
            let cols_b = &lat.rows[rb];
            let nb = cols_b.len();
            let (qw, qg, qg2) = (&pw[rb], &pwg[rb], &pwg2[rb]);
            let mut lo = 0usize;
            let mut hi = 0usize;
            for (pos, &(ca, _)) in row_a.iter().enumerate() {
                let clo = ca - a_max;
                let chi = ca + a_max;
                while lo < nb && cols_b[lo].0 < clo {
                    lo += 1;
                }
                if hi < lo {
                    hi = lo;
                }
                while hi < nb && cols_b[hi].0 <= chi {
                    hi += 1;
                }
                s0[pos] += qw[hi] - qw[lo];
                s1[pos] += qg[hi] - qg[lo];
                s2[pos] += qg2[hi] - qg2[lo];
            }
        }
        for (pos, &(_, id)) in row_a.iter().enumerate() {
            let id = id as usize;
            let gx = g[id];
            let inner = (s2[pos] - 2.0 * gx * s1[pos] + gx * gx * s0[pos]).max(0.0);
            acc += w[id] * inner / s0[pos];
        }
    }
    acc.sqrt()
}

/// Evaluate the modulus at each requested scale.
///
/// Scales must be strictly decreasing, above the space resolution and below
/// the diameter; outside that window the modulus is identically zero or
/// saturated and a profile carries no information.
pub fn besov_profile(f: &DiscreteFunction, p: f64, scales: &[f64]) -> Result<BesovProfile> {
    check_p(p)?;
    if scales.is_empty() {
        return Err(Error::EmptyInput("scales"));
    }
    let space = f.space().as_ref();
    for pair in scales.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::InvalidParameter {
                name: "scales",
                message: format!(
                    "scales must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                ),
            });
        }
    }
    let (lo, hi) = (*scales.last().unwrap(), scales[0]);
    if !(lo > space.resolution()) || !(hi < space.diameter()) {
        return Err(Error::InvalidParameter {
            name: "scales",
            message: format!(
                "scales must lie inside (resolution, diameter) = ({}, {}); got [{lo}, {hi}]",
                space.resolution(),
                space.diameter()
            ),
        });
    }
    let moduli = scales
        .iter()
        .map(|&t| modulus_of_continuity(f, t, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(BesovProfile {
        scales: scales.to_vec(),
        moduli,
        p,
    })
}

/// Dyadic scales `2^{-k}`, `k = 1..`, truncated at `2^{-k} ≥ h`.
fn dyadic_scales(h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::InvalidParameter {
            name: "scale window",
            message: format!(
                "no usable dyadic scales: resolution {h} leaves nothing in [h, 1/2]"
            ),
        });
    }
    let kmax = (1.0 / h).log2().floor() as i32;
    Ok((1..=kmax).map(|k| 2.0f64.powi(-k)).collect())
}

/// Number of quadrature nodes used for the scale integral.
const QUADRATURE_NODES: usize = 96;

/// The scale part of the norm: `(∫ or Σ of (t^{-α} E_p f(t))^q)^{1/q}`, with a
/// sup over scales when `q = ∞`.
pub fn besov_seminorm(f: &DiscreteFunction, params: &BesovParams, mode: NormMode) -> Result<f64> {
    params.validate()?;
    let h = f.space().resolution();
    match mode {
        NormMode::Dyadic => {
            let scales = dyadic_scales(h)?;
            let weighted = scales
                .iter()
                .map(|&t| Ok(t.powf(-params.alpha) * modulus_of_continuity(f, t, params.p)?))
                .collect::<Result<Vec<f64>>>()?;
            aggregate_q(&weighted, None, params.q)
        }
        NormMode::Quadrature => {
            if !(h < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "scale window",
                    message: format!("no usable scales: resolution {h} is not below 1"),
                });
            }
            let grid = LogGrid::new(h, 1.0, QUADRATURE_NODES)?;
            let nodes = grid.points();
            let weighted = nodes
                .iter()
                .map(|&t| Ok(t.powf(-params.alpha) * modulus_of_continuity(f, t, params.p)?))
                .collect::<Result<Vec<f64>>>()?;
            aggregate_q(&weighted, Some(&grid), params.q)
        }
    }
}

/// `L^q`-aggregate weighted values across scales: plain `ℓ^q` sum for dyadic
/// mode, log-trapezoid integral when a grid is supplied, sup for `q = ∞`.
fn aggregate_q(weighted: &[f64], grid: Option<&LogGrid>, q: QIndex) -> Result<f64> {
    match q {
        QIndex::Infinity => Ok(weighted.iter().copied().fold(0.0, f64::max)),
        QIndex::Finite(q) => {
            let powered: Vec<f64> = weighted.iter().map(|&v| v.powf(q)).collect();
            let total = match grid {
                Some(g) => g.integrate(&powered)?,
                None => powered.iter().sum(),
            };
            Ok(total.powf(1.0 / q))
        }
    }
}

/// The full norm `‖f‖_p +` scale seminorm.
pub fn besov_norm(f: &DiscreteFunction, params: &BesovParams, mode: NormMode) -> Result<f64> {
    Ok(f.lp_norm(params.p)? + besov_seminorm(f, params, mode)?)
}

/// Least-squares slope of `log E_p f(t)` against `log t` — the apparent
/// smoothness exponent of the profile.
///
/// Scales with a vanishing modulus carry no slope information and are
/// dropped; if fewer than three remain the function oscillates below the
/// measurable floor and the fit refuses with a degenerate-fit error
/// ("infinitely smooth at this resolution").
pub fn fit_smoothness(profile: &BesovProfile) -> Result<f64> {
    let mut ts = Vec::new();
    let mut es = Vec::new();
    for (&t, &e) in profile.scales.iter().zip(&profile.moduli) {
        if e > 0.0 {
            ts.push(t);
            es.push(e);
        }
    }
    if ts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "infinitely smooth at this resolution: only {} of {} scales have nonzero modulus (need 3)",
            ts.len(),
            profile.scales.len()
        )));
    }
    let (slope, _) = crate::fit::log_log_slope(&ts, &es)?;
    Ok(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::grid_space;
    use proptest::prelude::*;

    fn arc_grid(dim: usize, level: u32) -> Arc<PointCloudSpace> {
        grid_space(dim, level).unwrap()
    }

    fn two_point_space() -> Arc<PointCloudSpace> {
        Arc::new(
            PointCloudSpace::from_distance_matrix(
                vec![0.0, 1.0, 1.0, 0.0],
                vec![1.0, 1.0],
                1.0,
            )
            .unwrap(),
        )
    }

    fn seeded_values(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Independent O(n²) evaluation straight from the definition.
    fn brute_force_modulus(f: &DiscreteFunction, t: f64, p: f64) -> f64 {
        let space = f.space().as_ref();
        let w = space.weights();
        let mut acc = 0.0;
        for x in 0..space.len() {
            let mut inner = 0.0;
            let mut mass = 0.0;
            for y in 0..space.len() {
                let d = space.distance(x, y);
                if d * d < t * t {
                    inner += (f.value(y) - f.value(x)).abs().powf(p) * w[y];
                    mass += w[y];
                }
            }
            acc += w[x] * inner / mass;
        }
        acc.powf(1.0 / p)
    }

    #[test]
    fn two_point_modulus_matches_hand_values() {
        let f = DiscreteFunction::new(two_point_space(), vec![0.0, 1.0]).unwrap();
        // Ball of radius 2 holds both points: each centre sees average
        // oscillation 1/2, total mass 2 → E_1 = 1.
        assert_eq!(modulus_of_continuity(&f, 2.0, 1.0).unwrap(), 1.0);
        // Radius 1/2: balls are singletons.
        assert_eq!(modulus_of_continuity(&f, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_function_has_zero_modulus_and_pure_lp_norm() {
        let space = arc_grid(1, 4);
        let f = DiscreteFunction::new(Arc::clone(&space), vec![3.7; space.len()]).unwrap();
        for t in [0.1, 0.33, 2.0] {
            assert_eq!(modulus_of_continuity(&f, t, 2.0).unwrap(), 0.0);
        }
        let params = BesovParams {
            alpha: 0.5,
            p: 2.0,
            q: QIndex::Finite(2.0),
        };
        for mode in [NormMode::Dyadic, NormMode::Quadrature] {
            assert_eq!(besov_seminorm(&f, &params, mode).unwrap(), 0.0);
            assert_eq!(
                besov_norm(&f, &params, mode).unwrap(),
                f.lp_norm(2.0).unwrap()
            );
        }
    }

    #[test]
    fn hat_profile_matches_brute_force_at_every_scale() {
        let space = arc_grid(1, 4);
        let values: Vec<f64> = (0..space.len())
            .map(|i| {
                let x = space.coord(i).unwrap()[0];
                (1.0 - 2.0 * (x - 0.5).abs()).max(0.0)
            })
            .collect();
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        // Scales offset from lattice multiples so the open-ball boundary is
        // never within rounding distance of a point.
        let scales: Vec<f64> = (1..=5)
            .rev()
            .map(|k| (k as f64 + 0.37) * space.resolution())
            .collect();
        let profile = besov_profile(&f, 1.0, &scales).unwrap();
        for (&t, &e) in profile.scales.iter().zip(&profile.moduli) {
            let oracle = brute_force_modulus(&f, t, 1.0);
            assert!(
                (e - oracle).abs() <= 1e-12 * (1.0 + oracle),
                "t={t}: {e} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn lattice_fast_path_matches_generic_path() {
        for (dim, level) in [(1usize, 6u32), (2, 3), (2, 4)] {
            let space = arc_grid(dim, level);
            assert!(space.lattice().is_some(), "grid should detect as lattice");
            let values = seeded_values(space.len(), 42 + level as u64);
            let h = space.resolution();
            for mult in [1.4, 3.7, 9.2, 31.6] {
                let t = mult * h;
                if t >= space.diameter() * 2.0 {
                    continue;
                }
                let fast = modulus_lattice_p2(&space, &values, t);
                let slow = modulus_generic(&space, &values, t, 2.0);
                assert!(
                    (fast - slow).abs() <= 1e-9 * (1.0 + slow),
                    "dim {dim} level {level} t={t}: fast {fast} vs generic {slow}"
                );
            }
        }
    }

    #[test]
    fn modulus_vanishes_below_resolution_and_saturates_above_diameter() {
        let space = arc_grid(1, 4);
        let values = seeded_values(space.len(), 7);
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        assert_eq!(
            modulus_of_continuity(&f, space.resolution(), 2.0).unwrap(),
            0.0
        );
        let beyond1 = modulus_of_continuity(&f, space.diameter() * 1.5, 2.0).unwrap();
        let beyond2 = modulus_of_continuity(&f, space.diameter() * 3.0, 2.0).unwrap();
        assert!((beyond1 - beyond2).abs() <= 1e-12 * (1.0 + beyond1));
        assert!(beyond1 > 0.0);
    }

    #[test]
    fn dyadic_and_quadrature_norms_agree_on_smooth_bump() {
        // At alpha = 1/2, q = 2 the dyadic sum is an unbiased estimate of the
        // scale integral for profiles with E ~ t, so the two modes act as
        // mutual oracles.  The bump sits on a span-4 segment so its
        // oscillation keeps growing across the whole [h, 1] scale window
        // (saturation, where the two modes weigh scales differently, stays
        // above the window).
        let space = crate::generators::grid_space_span(1, 7, 0.0, 4.0).unwrap();
        let values: Vec<f64> = (0..space.len())
            .map(|i| {
                let x = space.coord(i).unwrap()[0];
                (-((x - 2.0) / 0.6).powi(2)).exp()
            })
            .collect();
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        let params = BesovParams {
            alpha: 0.5,
            p: 2.0,
            q: QIndex::Finite(2.0),
        };
        let dy = besov_norm(&f, &params, NormMode::Dyadic).unwrap();
        let quad = besov_norm(&f, &params, NormMode::Quadrature).unwrap();
        assert!(
            (dy - quad).abs() <= 0.05 * quad,
            "dyadic {dy} vs quadrature {quad}"
        );
    }

    #[test]
    fn q_infinity_norm_is_lp_plus_sup_over_dyadic_scales() {
        let space = arc_grid(1, 5);
        let values = seeded_values(space.len(), 99);
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        let alpha = 0.3;
        let params = BesovParams {
            alpha,
            p: 2.0,
            q: QIndex::Infinity,
        };
        let got = besov_norm(&f, &params, NormMode::Dyadic).unwrap();
        let mut sup = 0.0f64;
        let mut k = 1;
        while 2.0f64.powi(-k) >= space.resolution() {
            let t = 2.0f64.powi(-k);
            sup = sup.max(t.powf(-alpha) * modulus_of_continuity(&f, t, 2.0).unwrap());
            k += 1;
        }
        assert!((got - (f.lp_norm(2.0).unwrap() + sup)).abs() <= 1e-12 * (1.0 + got));
    }

    #[test]
    fn linear_function_has_unit_smoothness_slope() {
        let space = arc_grid(1, 7);
        let values: Vec<f64> = (0..space.len()).map(|i| space.coord(i).unwrap()[0]).collect();
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        let scales: Vec<f64> = (2..=6).map(|k| 2.0f64.powi(-k)).collect();
        let profile = besov_profile(&f, 2.0, &scales).unwrap();
        let slope = fit_smoothness(&profile).unwrap();
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn half_line_indicator_has_unit_slope_for_p1() {
        let space = arc_grid(1, 8);
        let values: Vec<f64> = (0..space.len())
            .map(|i| if space.coord(i).unwrap()[0] >= 0.5 { 1.0 } else { 0.0 })
            .collect();
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        let scales: Vec<f64> = (2..=7).map(|k| 2.0f64.powi(-k)).collect();
        let profile = besov_profile(&f, 1.0, &scales).unwrap();
        let slope = fit_smoothness(&profile).unwrap();
        assert!((slope - 1.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn constant_profile_signals_infinitely_smooth() {
        let space = arc_grid(1, 5);
        let f = DiscreteFunction::new(Arc::clone(&space), vec![2.0; space.len()]).unwrap();
        let scales: Vec<f64> = (2..=4).map(|k| 2.0f64.powi(-k)).collect();
        let profile = besov_profile(&f, 2.0, &scales).unwrap();
        assert!(profile.moduli.iter().all(|&e| e == 0.0));
        match fit_smoothness(&profile) {
            Err(Error::DegenerateFit(msg)) => {
                assert!(msg.contains("infinitely smooth"), "message: {msg}")
            }
            other => panic!("expected degenerate-fit signal, got {other:?}"),
        }
    }

    #[test]
    fn profile_is_reproducible_bit_for_bit() {
        let space = arc_grid(2, 3);
        let values = seeded_values(space.len(), 5);
        let f = DiscreteFunction::new(Arc::clone(&space), values).unwrap();
        let scales: Vec<f64> = (1..=3).map(|k| 2.0f64.powi(-k) * 1.1).collect();
        let a = besov_profile(&f, 2.0, &scales).unwrap();
        let b = besov_profile(&f, 2.0, &scales).unwrap();
        assert_eq!(a.moduli, b.moduli);
    }

    #[test]
    fn rejects_bad_inputs() {
        let space = arc_grid(1, 3);
        let f = DiscreteFunction::new(Arc::clone(&space), seeded_values(space.len(), 1)).unwrap();
        assert!(modulus_of_continuity(&f, -1.0, 2.0).is_err());
        assert!(modulus_of_continuity(&f, 0.0, 2.0).is_err());
        assert!(modulus_of_continuity(&f, 0.1, 0.5).is_err());
        assert!(DiscreteFunction::new(Arc::clone(&space), vec![1.0]).is_err());
        assert!(DiscreteFunction::new(Arc::clone(&space), vec![f64::NAN; space.len()]).is_err());
        let bad = BesovParams {
            alpha: 1.5,
            p: 2.0,
            q: QIndex::Finite(2.0),
        };
        assert!(besov_norm(&f, &bad, NormMode::Dyadic).is_err());
        // Increasing scales rejected.
        assert!(besov_profile(&f, 2.0, &[0.1, 0.2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn modulus_at_most_twice_lp_norm(
            seed in 0u64..1000,
            tmul in 0.5f64..20.0,
            p_idx in 0usize..3,
        ) {
            let p = [1.0, 2.0, 3.0][p_idx];
            let space = arc_grid(1, 4);
            let f = DiscreteFunction::new(
                Arc::clone(&space),
                seeded_values(space.len(), seed),
            ).unwrap();
            let t = tmul * space.resolution();
            let e = modulus_of_continuity(&f, t, p).unwrap();
            let lp = f.lp_norm(p).unwrap();
            prop_assert!(e <= 2.0 * lp + 1e-9 * (1.0 + lp), "E={e} vs 2·lp={}", 2.0 * lp);
        }

        #[test]
        fn modulus_ignores_constant_shifts(
            seed in 0u64..1000,
            shift in -50.0f64..50.0,
            tmul in 1.2f64..10.0,
        ) {
            let space = arc_grid(1, 4);
            let base = seeded_values(space.len(), seed);
            let shifted: Vec<f64> = base.iter().map(|v| v + shift).collect();
            let f = DiscreteFunction::new(Arc::clone(&space), base).unwrap();
            let fc = DiscreteFunction::new(Arc::clone(&space), shifted).unwrap();
            let t = tmul * space.resolution();
            let a = modulus_of_continuity(&f, t, 2.0).unwrap();
            let b = modulus_of_continuity(&fc, t, 2.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a), "{a} vs {b}");
        }

        #[test]
        fn modulus_is_absolutely_homogeneous(
            seed in 0u64..1000,
            lambda in -20.0f64..20.0,
            tmul in 1.2f64..10.0,
        ) {
            let space = arc_grid(1, 4);
            let f = DiscreteFunction::new(
                Arc::clone(&space),
                seeded_values(space.len(), seed),
            ).unwrap();
            let fl = f.scale(lambda).unwrap();
            let t = tmul * space.resolution();
            let a = modulus_of_continuity(&f, t, 2.0).unwrap();
            let b = modulus_of_continuity(&fl, t, 2.0).unwrap();
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-9 * (1.0 + b), "{b} vs |λ|·{a}");
        }

        #[test]
        fn besov_norm_satisfies_triangle_inequality(
            seed_f in 0u64..500,
            seed_g in 500u64..1000,
            alpha in 0.1f64..0.9,
            q_idx in 0usize..3,
        ) {
            let space = arc_grid(1, 4);
            let f = DiscreteFunction::new(Arc::clone(&space), seeded_values(space.len(), seed_f)).unwrap();
            let g = DiscreteFunction::new(Arc::clone(&space), seeded_values(space.len(), seed_g)).unwrap();
            let q = [QIndex::Finite(1.0), QIndex::Finite(2.0), QIndex::Infinity][q_idx];
            let params = BesovParams { alpha, p: 2.0, q };
            let sum = f.add(&g).unwrap();
            let nf = besov_norm(&f, &params, NormMode::Dyadic).unwrap();
            let ng = besov_norm(&g, &params, NormMode::Dyadic).unwrap();
            let ns = besov_norm(&sum, &params, NormMode::Dyadic).unwrap();
            prop_assert!(ns <= nf + ng + 1e-12 * (1.0 + nf + ng), "{ns} vs {nf}+{ng}");
        }
    }
}
