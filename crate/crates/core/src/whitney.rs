//! Whitney-type covering of the complement of a closed point set, with its
//! Lipschitz partition of unity and a bounded-overlap measurement.
//!
//! Given a space `X` and a nonempty subset `F`, the cover selects balls
//! `B_i = B(x_i, r_i)` with `r_i = d(x_i, F)/12`, greedily per dyadic
//! distance layer from coarse to fine, maximal and pairwise disjoint.  That
//! construction forces, for every point `x ∈ 6B_i`, the two-sided bracket
//! `6 r_i ≤ d(x, F) ≤ 18 r_i` (triangle inequality), and greedy maximality
//! makes the tripled balls `{3B_i}` cover every point with
//! `0 < d(x, F) < scale_unit/2`.  All of these conclusions are verified
//! exhaustively on every discrete point as a construction post-condition —
//! a failure is a bug, not a data issue.
//!
//! The partition of unity is built from tent bumps
//! `h_i(x) = clamp((6 r_i − d(x, x_i)) / (3 r_i), 0, 1)` (so `h_i ≡ 1` on
//! `3B_i`, supported in `6B_i`), normalised as `φ_i = h_i / max(1, Σ_j h_j)`.
//! The sum `Σ_i φ_i` equals 1 exactly where some tripled ball covers the
//! point and vanishes outside `Ω = ∪ 6B_i`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::PointCloudSpace;

/// One ball of a Whitney cover.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WhitneyBall {
    /// Index of the centre point.
    pub center: u32,
    /// Ball radius `d(center, F) / 12`.
    pub radius: f64,
    /// Dyadic layer `k ≥ 1`: the centre satisfies
    /// `2^{-k-1} ≤ d(center, F)/scale_unit < 2^{-k}`.
    pub layer: u32,
}

/// A verified Whitney cover of `{x : 0 < d(x, F) < scale_unit/2}`.
#[derive(Debug, Clone)]
pub struct WhitneyCover {
    space: Arc<PointCloudSpace>,
    f_indices: Vec<u32>,
    scale_unit: f64,
    dist_to_f: Vec<f64>,
    /// The selected balls, in greedy selection order (coarse layers first).
    pub balls: Vec<WhitneyBall>,
    /// For each ball, a nearest point of `F` to its centre; the anchor is
    /// within `12 r_i < 18 r_i` of the centre, which guarantees enlarged
    /// balls around the centre reach positive `F`-mass.
    pub anchor_points: Vec<u32>,
    /// Measured maximum number of sixfold balls `6B_i` covering any single
    /// discrete point.
    pub overlap_bound: usize,
}

impl WhitneyCover {
    /// The ambient space the cover lives in.
    pub fn space(&self) -> &Arc<PointCloudSpace> {
        &self.space
    }

    /// The subset the cover was built against (sorted, deduplicated).
    pub fn f_indices(&self) -> &[u32] {
        &self.f_indices
    }

    /// The distance normalisation: centres satisfy
    /// `0 < d(x_i, F) < scale_unit/2`.
    pub fn scale_unit(&self) -> f64 {
        self.scale_unit
    }

    /// Cached distance to `F` for every point of the space.
    pub fn dist_to_f(&self) -> &[f64] {
        &self.dist_to_f
    }

    /// Whether the cover holds no balls (valid when no point lies in the
    /// coverable band).
    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

/// The Lipschitz partition of unity subordinate to a Whitney cover.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    /// For each point, the `(ball index, φ_i(x))` pairs with `φ_i(x) > 0`,
    /// ascending by ball index.
    per_point: Vec<Vec<(u32, f64)>>,
    /// Per ball: measured `sup |φ_i(x) − φ_i(y)| · r_i / d(x, y)` over a
    /// seeded sample of point pairs in `8B_i`.
    pub lipschitz_ratios: Vec<f64>,
    /// Number of `(ball, point)` pairs where the strict requirement
    /// "φ_i = 1 on B_i" fails because another ball's support reaches into
    /// `B_i`; the jointly-consistent identity `Σ φ = 1` still holds there.
    pub strict_identity_violations: usize,
}

impl PartitionOfUnity {
    /// The `(ball, value)` pairs active at a point.
    pub fn at(&self, point: usize) -> &[(u32, f64)] {
        &self.per_point[point]
    }

    /// `Σ_i φ_i(x)`.
    pub fn sum_at(&self, point: usize) -> f64 {
        self.per_point[point].iter().map(|&(_, v)| v).sum()
    }

    /// `φ_i(x)` for one ball (zero when the point is outside its support).
    pub fn phi(&self, ball: usize, point: usize) -> f64 {
        self.per_point[point]
            .iter()
            .find(|&&(b, _)| b as usize == ball)
            .map_or(0.0, |&(_, v)| v)
    }

    /// Number of points carrying at least one nonzero value.
    pub fn support_size(&self) -> usize {
        self.per_point.iter().filter(|l| !l.is_empty()).count()
    }
}

/// Tolerance for the exhaustive geometric post-conditions: purely a guard
/// against floating-point rounding in distance computations.
const GEOM_EPS: f64 = 1e-9;

/// Build and exhaustively verify a Whitney cover of the complement of `F`.
///
/// Proceeds layer by layer from coarse to fine; within a layer candidates are
/// taken in ascending index order and accepted when their ball is disjoint
/// (centre distance at least the radius sum) from every ball accepted so
/// far.  Returns an empty cover when no point satisfies
/// `0 < d(x, F) < scale_unit/2`.
pub fn whitney_cover(
    space: &Arc<PointCloudSpace>,
    f: &[u32],
    scale_unit: f64,
) -> Result<WhitneyCover> {
    if f.is_empty() {
        return Err(Error::EmptyInput("whitney cover subset"));
    }
    if !(scale_unit > 0.0) || !scale_unit.is_finite() {
        return Err(Error::InvalidParameter {
            name: "scale_unit",
            message: format!("scale unit must be positive and finite, got {scale_unit}"),
        });
    }
    let mut f_indices = f.to_vec();
    f_indices.sort_unstable();
    f_indices.dedup();
    if f_indices.last().map_or(false, |&i| i as usize >= space.len()) {
        return Err(Error::IndexOutOfRange {
            index: *f_indices.last().unwrap() as usize,
            len: space.len(),
        });
    }

    let dist_to_f: Vec<f64> = (0..space.len())
        .map(|x| space.distance_to_set(x, &f_indices))
        .collect::<Result<_>>()?;

    // Layer assignment by exact halving: layer k ≥ 1 holds the points with
    // scale_unit·2^{-k-1} ≤ d < scale_unit·2^{-k}.
    let layer_of = |d: f64| -> Option<u32> {
        if !(d > 0.0) || d >= scale_unit / 2.0 {
            return None;
        }
        let mut k = 1u32;
        let mut upper = scale_unit / 2.0;
        loop {
            if d >= upper / 2.0 {
                return Some(k);
            }
            upper /= 2.0;
            k += 1;
            // d > 0 terminates the halving; cap against subnormal walks.
            if k > 4200 {
                return None;
            }
        }
    };

    let mut by_layer: Vec<(u32, u32)> = Vec::new(); // (layer, point)
    for (x, &d) in dist_to_f.iter().enumerate() {
        if let Some(k) = layer_of(d) {
            by_layer.push((k, x as u32));
        }
    }
    by_layer.sort_unstable(); // coarse layers first, then ascending index

    let mut balls: Vec<WhitneyBall> = Vec::new();
    for &(layer, x) in &by_layer {
        let r = dist_to_f[x as usize] / 12.0;
        let disjoint = balls.iter().all(|b| {
            space.distance(x as usize, b.center as usize) >= r + b.radius
        });
        if disjoint {
            balls.push(WhitneyBall {
                center: x,
                radius: r,
                layer,
            });
        }
    }

    let anchor_points: Vec<u32> = balls
        .iter()
        .map(|b| {
            let mut best = f_indices[0];
            let mut best_d = f64::INFINITY;
            for &s in &f_indices {
                let d = space.distance(b.center as usize, s as usize);
                if d < best_d {
                    best_d = d;
                    best = s;
                }
            }
            best
        })
        .collect();

    let overlap_bound = verify_cover(space, &f_indices, scale_unit, &dist_to_f, &balls, &anchor_points)?;

    Ok(WhitneyCover {
        space: Arc::clone(space),
        f_indices,
        scale_unit,
        dist_to_f,
        balls,
        anchor_points,
        overlap_bound,
    })
}

/// Exhaustive post-conditions over every discrete point; returns the
/// measured overlap bound of `{6B_i}`.
fn verify_cover(
    space: &PointCloudSpace,
    f_indices: &[u32],
    scale_unit: f64,
    dist_to_f: &[f64],
    balls: &[WhitneyBall],
    anchors: &[u32],
) -> Result<usize> {
    // Pairwise disjointness (centre separation at least the radius sum).
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[..i] {
            let d = space.distance(a.center as usize, b.center as usize);
            if d < a.radius + b.radius {
                return Err(Error::ConstructionInvariant(format!(
                    "whitney balls {i} and earlier ball overlap: centre distance {d} < radius sum {}",
                    a.radius + b.radius
                )));
            }
        }
    }

    // Centre band, radius law, layer consistency, anchor reach.
    for (i, b) in balls.iter().enumerate() {
        let d = dist_to_f[b.center as usize];
        if !(d > 0.0 && d < scale_unit / 2.0) {
            return Err(Error::ConstructionInvariant(format!(
                "ball {i}: centre distance to subset {d} outside (0, scale_unit/2)"
            )));
        }
        if (b.radius - d / 12.0).abs() > GEOM_EPS * d {
            return Err(Error::ConstructionInvariant(format!(
                "ball {i}: radius {} is not d/12 = {}",
                b.radius,
                d / 12.0
            )));
        }
        let lo = scale_unit * 2.0f64.powi(-(b.layer as i32) - 1);
        let hi = scale_unit * 2.0f64.powi(-(b.layer as i32));
        if !(d >= lo && d < hi) {
            return Err(Error::ConstructionInvariant(format!(
                "ball {i}: centre distance {d} not in layer-{} shell [{lo}, {hi})",
                b.layer
            )));
        }
        let da = space.distance(b.center as usize, anchors[i] as usize);
        if (da - d).abs() > GEOM_EPS * (1.0 + d) || da >= 18.0 * b.radius {
            return Err(Error::ConstructionInvariant(format!(
                "ball {i}: anchor at distance {da}, expected the minimal distance {d} < 18r = {}",
                18.0 * b.radius
            )));
        }
    }

    // Two-sided bracket on every discrete point of every sixfold ball, and
    // the measured overlap of {6B_i}.
    let mut coverage_6 = vec![0u32; space.len()];
    let mut covered_3 = vec![false; space.len()];
    for (i, b) in balls.iter().enumerate() {
        let r6 = 6.0 * b.radius;
        let r3 = 3.0 * b.radius;
        let mut bad: Option<String> = None;
        space.visit_ball(b.center as usize, r6, |y, d2| {
            let y = y as usize;
            coverage_6[y] += 1;
            if d2 < r3 * r3 {
                covered_3[y] = true;
            }
            let dyf = dist_to_f[y];
            let slack = GEOM_EPS * (1.0 + dyf);
            if (dyf < 6.0 * b.radius - slack || dyf > 18.0 * b.radius + slack) && bad.is_none() {
                bad = Some(format!(
                    "ball {i}: point {y} in 6B has d(y,F) = {dyf} outside [6r, 18r] = [{}, {}]",
                    6.0 * b.radius,
                    18.0 * b.radius
                ));
            }
        });
        if let Some(msg) = bad {
            return Err(Error::ConstructionInvariant(msg));
        }
    }

    // Covering property from greedy maximality: every point of the band
    // lies in some tripled ball.
    for (x, &d) in dist_to_f.iter().enumerate() {
        if d > 0.0 && d < scale_unit / 2.0 && !covered_3[x] {
            return Err(Error::ConstructionInvariant(format!(
                "point {x} with d(x,F) = {d} in the band is not covered by any tripled ball"
            )));
        }
    }
    let _ = f_indices;

    Ok(coverage_6.iter().map(|&c| c as usize).max().unwrap_or(0))
}

/// Points sampled per ball when measuring Lipschitz ratios.
const LIPSCHITZ_SAMPLE: usize = 48;

/// Build the partition of unity subordinate to a cover, verify its
/// identities on every discrete point, and measure per-ball Lipschitz
/// ratios.
pub fn partition_of_unity(cover: &WhitneyCover) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return Err(Error::EmptyInput("partition of a cover with no balls"));
    }
    let space = cover.space.as_ref();
    let n = space.len();

    // Bumps h_i per point: 1 on 3B_i, linear taper to 0 at 6B_i's edge.
    let mut bumps: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, b) in cover.balls.iter().enumerate() {
        let r6 = 6.0 * b.radius;
        space.visit_ball(b.center as usize, r6, |y, d2| {
            let h = ((r6 - d2.sqrt()) / (3.0 * b.radius)).clamp(0.0, 1.0);
            if h > 0.0 {
                bumps[y as usize].push((i as u32, h));
            }
        });
    }

    let mut per_point: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for list in &mut bumps {
        list.sort_unstable_by_key(|&(i, _)| i);
        let s: f64 = list.iter().map(|&(_, h)| h).sum();
        let denom = s.max(1.0);
        per_point.push(list.iter().map(|&(i, h)| (i, h / denom)).collect());
    }

    // Identities, exhaustively.
    let mut strict_violations = 0usize;
    for x in 0..n {
        let sum = per_point[x].iter().map(|&(_, v)| v).sum::<f64>();
        if per_point[x].iter().any(|&(_, v)| !(0.0..=1.0 + 1e-12).contains(&v)) {
            return Err(Error::ConstructionInvariant(format!(
                "partition value outside [0,1] at point {x}"
            )));
        }
        if sum > 1.0 + 1e-12 {
            return Err(Error::ConstructionInvariant(format!(
                "partition sum {sum} exceeds 1 at point {x}"
            )));
        }
        let d = cover.dist_to_f[x];
        if d > 0.0 && d < cover.scale_unit / 2.0 && (sum - 1.0).abs() > 1e-12 {
            return Err(Error::ConstructionInvariant(format!(
                "partition sum {sum} differs from 1 at banded point {x} (d = {d})"
            )));
        }
    }
    // Support containment and the strict per-ball identity on B_i.
    for (i, b) in cover.balls.iter().enumerate() {
        let r6 = 6.0 * b.radius;
        for x in 0..n {
            let v = per_point[x]
                .iter()
                .find(|&&(bi, _)| bi as usize == i)
                .map(|&(_, v)| v);
            if let Some(v) = v {
                if v > 0.0 && space.distance(x, b.center as usize) >= r6 {
                    return Err(Error::ConstructionInvariant(format!(
                        "φ_{i} positive outside 6B at point {x}"
                    )));
                }
            }
        }
        space.visit_ball(b.center as usize, b.radius, |y, _| {
            let v = per_point[y as usize]
                .iter()
                .find(|&&(bi, _)| bi as usize == i)
                .map_or(0.0, |&(_, v)| v);
            if (v - 1.0).abs() > 1e-12 {
                strict_violations += 1;
            }
        });
    }

    // Measured Lipschitz ratios over seeded point pairs in 8B_i.
    let mut lipschitz_ratios = Vec::with_capacity(cover.balls.len());
    for (i, b) in cover.balls.iter().enumerate() {
        let hood = space.ball(b.center as usize, 8.0 * b.radius)?;
        let sample = seeded_subset(&hood, LIPSCHITZ_SAMPLE, 0x11F5_0000 + i as u64);
        let mut sup: f64 = 0.0;
        for (a_pos, &a) in sample.iter().enumerate() {
            let va = per_point[a as usize]
                .iter()
                .find(|&&(bi, _)| bi as usize == i)
                .map_or(0.0, |&(_, v)| v);
            for &c in &sample[a_pos + 1..] {
                let vc = per_point[c as usize]
                    .iter()
                    .find(|&&(bi, _)| bi as usize == i)
                    .map_or(0.0, |&(_, v)| v);
                let d = space.distance(a as usize, c as usize);
                if d > 0.0 {
                    sup = sup.max((va - vc).abs() * b.radius / d);
                }
            }
        }
        lipschitz_ratios.push(sup);
    }

    Ok(PartitionOfUnity {
        per_point,
        lipschitz_ratios,
        strict_identity_violations: strict_violations,
    })
}

/// Deterministic subsample (ascending) of at most `take` entries.
fn seeded_subset(pool: &[u32], take: usize, seed: u64) -> Vec<u32> {
    if pool.len() <= take {
        return pool.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<u32> = rand::seq::index::sample(&mut rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Measured overlap constant for a family of disjoint balls: the maximum,
/// over a dyadic radius grid `r` and over all discrete points `x`, of the
/// number of balls with `a·r ≤ r_i ≤ b·r` whose κ-fold enlargement contains
/// `x`.
pub fn bounded_overlap_check(
    space: &PointCloudSpace,
    balls: &[(u32, f64)],
    a: f64,
    b: f64,
    kappa: f64,
) -> Result<usize> {
    if balls.is_empty() {
        return Err(Error::EmptyInput("overlap check on no balls"));
    }
    if !(a >= 1.0 && b > a) {
        return Err(Error::InvalidParameter {
            name: "a,b",
            message: format!("radius band must satisfy 1 ≤ a < b, got a={a}, b={b}"),
        });
    }
    if !(kappa > 1.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            message: format!("enlargement factor must exceed 1, got {kappa}"),
        });
    }
    for (i, &(ci, ri)) in balls.iter().enumerate() {
        if !(ri > 0.0) {
            return Err(Error::InvalidParameter {
                name: "balls",
                message: format!("ball {i} has nonpositive radius {ri}"),
            });
        }
        for &(cj, rj) in &balls[..i] {
            let d = space.distance(ci as usize, cj as usize);
            if d < ri + rj {
                return Err(Error::BallsNotDisjoint {
                    first: cj as usize,
                    second: ci as usize,
                    distance: d,
                    radius_sum: ri + rj,
                });
            }
        }
    }

    let rmin = balls.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let rmax = balls.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    let m_lo = (rmin / b).log2().floor() as i32;
    let m_hi = (rmax / a).log2().ceil() as i32;

    let mut worst = 0usize;
    let mut counts = vec![0u32; space.len()];
    for m in m_lo..=m_hi {
        let r = 2.0f64.powi(m);
        counts.iter_mut().for_each(|c| *c = 0);
        let mut any = false;
        for &(ci, ri) in balls {
            if ri >= a * r && ri <= b * r {
                any = true;
                space.visit_ball(ci as usize, kappa * ri, |y, _| {
                    counts[y as usize] += 1;
                });
            }
        }
        if any {
            worst = worst.max(*counts.iter().max().unwrap() as usize);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{grid_space, grid_space_span};
    use proptest::prelude::*;

    fn f_where<P: Fn(&[f64]) -> bool>(space: &PointCloudSpace, pred: P) -> Vec<u32> {
        (0..space.len())
            .filter(|&i| pred(space.coord(i).unwrap()))
            .map(|i| i as u32)
            .collect()
    }

    #[test]
    fn covering_everything_leaves_nothing_to_cover() {
        let space = grid_space(1, 4).unwrap();
        let all: Vec<u32> = (0..space.len() as u32).collect();
        let cover = whitney_cover(&space, &all, 1.0).unwrap();
        assert!(cover.is_empty());
        assert_eq!(cover.overlap_bound, 0);
        assert!(matches!(
            partition_of_unity(&cover),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn single_point_subset_on_symmetric_segment() {
        // [-1, 1] at pitch 2^{-8}; the subset is the origin, so the distance
        // to it is |x| and each ball's radius must be |x|/12.
        let space = grid_space_span(1, 9, -1.0, 1.0).unwrap();
        assert_eq!(space.resolution(), 2.0f64.powi(-8));
        let f = f_where(&space, |c| c[0] == 0.0);
        assert_eq!(f.len(), 1);
        let cover = whitney_cover(&space, &f, 1.0).unwrap();
        assert!(!cover.is_empty());
        for b in &cover.balls {
            let x = space.coord(b.center as usize).unwrap()[0];
            assert!(
                (b.radius - x.abs() / 12.0).abs() <= 1e-15,
                "radius {} vs |x|/12 = {}",
                b.radius,
                x.abs() / 12.0
            );
            // The bracket for points of 6B, directly.
            for y in space.ball(b.center as usize, 6.0 * b.radius).unwrap() {
                let dy = space.coord(y as usize).unwrap()[0].abs();
                assert!(dy >= 6.0 * b.radius - 1e-12 && dy <= 18.0 * b.radius + 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_subset_on_planar_grid_verifies_exhaustively() {
        let space = grid_space(2, 5).unwrap();
        let f = f_where(&space, |c| c[0] == c[1]);
        assert!(f.len() > 1);
        // Construction runs its own exhaustive post-conditions; reaching Ok
        // is the assertion.
        let cover = whitney_cover(&space, &f, 1.0).unwrap();
        assert!(!cover.is_empty());
        assert!(cover.overlap_bound >= 1);
        let pou = partition_of_unity(&cover).unwrap();
        assert_eq!(pou.lipschitz_ratios.len(), cover.balls.len());
    }

    #[test]
    fn partition_sums_one_on_band_and_zero_outside_support() {
        let space = grid_space_span(1, 9, -1.0, 1.0).unwrap();
        let f = f_where(&space, |c| c[0] == 0.0);
        let cover = whitney_cover(&space, &f, 1.0).unwrap();
        let pou = partition_of_unity(&cover).unwrap();
        let mut banded = 0;
        let mut outside = 0;
        for x in 0..space.len() {
            let d = cover.dist_to_f()[x];
            let sum = pou.sum_at(x);
            if d > 0.0 && d < 0.5 {
                banded += 1;
                assert!((sum - 1.0).abs() <= 1e-12, "sum {sum} at banded {x}");
            }
            // Supports reach at most 1.5·d(x_i,F) < 0.75; beyond that the
            // partition must vanish identically.
            if d >= 0.75 {
                outside += 1;
                assert_eq!(sum, 0.0, "nonzero sum at far point {x}");
            }
            assert!(sum <= 1.0 + 1e-12);
            for &(_, v) in pou.at(x) {
                assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
        assert!(banded > 100, "band should hold most of the segment");
        assert!(outside > 10, "far zone should be nonempty");
    }

    #[test]
    fn measured_lipschitz_ratios_stay_small() {
        let space = grid_space_span(1, 8, -1.0, 1.0).unwrap();
        let f = f_where(&space, |c| c[0] == 0.0);
        let cover = whitney_cover(&space, &f, 1.0).unwrap();
        let pou = partition_of_unity(&cover).unwrap();
        let sup = pou
            .lipschitz_ratios
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
        assert!(sup > 0.0);
        assert!(sup <= 2.0, "measured Lipschitz ratio {sup}");
    }

    #[test]
    fn cover_and_partition_stable_under_refinement() {
        let mut overlaps = Vec::new();
        let mut lips = Vec::new();
        for level in [8u32, 9] {
            let space = grid_space_span(1, level, -1.0, 1.0).unwrap();
            let f = f_where(&space, |c| c[0] == 0.0);
            let cover = whitney_cover(&space, &f, 1.0).unwrap();
            let pou = partition_of_unity(&cover).unwrap();
            overlaps.push(cover.overlap_bound as f64);
            lips.push(pou.lipschitz_ratios.iter().copied().fold(0.0f64, f64::max));
        }
        assert!(overlaps[1] < 2.0 * overlaps[0] && overlaps[0] < 2.0 * overlaps[1]);
        assert!(lips[1] < 2.0 * lips[0] && lips[0] < 2.0 * lips[1]);
    }

    #[test]
    fn overlap_check_counts_single_and_midpoint_pairs() {
        // Single ball.
        let space = grid_space_span(1, 6, 0.0, 4.0).unwrap();
        let mid = f_where(&space, |c| c[0] == 2.0)[0];
        assert_eq!(
            bounded_overlap_check(&space, &[(mid, 0.5)], 1.0, 2.0, 6.0).unwrap(),
            1
        );
        // Two unit-radius balls 2.5 apart: the doubled balls share the
        // midpoint.
        let c1 = f_where(&space, |c| c[0] == 0.5)[0];
        let c2 = f_where(&space, |c| c[0] == 3.0)[0];
        assert_eq!(
            bounded_overlap_check(&space, &[(c1, 1.0), (c2, 1.0)], 1.0, 2.0, 2.0).unwrap(),
            2
        );
        // Overlapping input refused.
        assert!(matches!(
            bounded_overlap_check(&space, &[(c1, 2.0), (c2, 2.0)], 1.0, 2.0, 2.0),
            Err(Error::BallsNotDisjoint { .. })
        ));
    }

    #[test]
    fn whitney_cover_overlap_small_and_stable() {
        let mut values = Vec::new();
        for level in [8u32, 9] {
            let space = grid_space_span(1, level, -1.0, 1.0).unwrap();
            let f = f_where(&space, |c| c[0] == 0.0);
            let cover = whitney_cover(&space, &f, 1.0).unwrap();
            let pairs: Vec<(u32, f64)> =
                cover.balls.iter().map(|b| (b.center, b.radius)).collect();
            let m = bounded_overlap_check(&space, &pairs, 1.0, 2.0, 6.0).unwrap();
            assert!(m <= 8, "overlap {m} at level {level}");
            values.push(m);
        }
        assert_eq!(values[0], values[1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn construction_postconditions_hold_for_random_subsets(
            seed in 0u64..500,
            f_count in 1usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let space = grid_space(1, 6).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<u32> = (0..f_count)
                .map(|_| rng.gen_range(0..space.len() as u32))
                .collect();
            // The constructor's exhaustive verification is the oracle: any
            // violated conclusion surfaces as a construction error.
            let cover = whitney_cover(&space, &f, 1.0).unwrap();
            if !cover.is_empty() {
                let pou = partition_of_unity(&cover).unwrap();
                prop_assert!(pou.lipschitz_ratios.iter().all(|&r| r.is_finite()));
            }
        }
    }
}
