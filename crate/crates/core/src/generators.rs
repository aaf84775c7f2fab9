//! Reference geometries with known scaling exponents.
//!
//! Each generator produces a [`PointCloudSpace`] whose volume-growth exponent
//! is known in closed form, so they double as ground truth for the estimators
//! in [`crate::space`]:
//!
//! | geometry            | exponent            |
//! |---------------------|---------------------|
//! | `grid_space(n, ·)`  | `n`                 |
//! | `sierpinski_gasket` | `log 3 / log 2`     |
//! | `dilated_gasket`    | `log 3 / log 2` (up to its truncation diameter) |
//! | `cantor_set`        | `log 2 / log 3`     |
//! | `product_space`     | sum of the factors' |
//!
//! Gasket construction runs entirely on an integer corner lattice so that
//! shared vertices deduplicate exactly; masses are accumulated per vertex in
//! deterministic (row-major) order.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{Metric, MuRule, PointCloudSpace, SubsetEmbedding};

/// Uniform grid on `[0,1]^dim` with `2^level + 1` points per axis, spacing
/// `h = 2^-level`, and per-point weight `h^dim` (the cell measure).
pub fn grid_space(dim: usize, level: u32) -> Result<Arc<PointCloudSpace>> {
    grid_space_span(dim, level, 0.0, 1.0)
}

/// Uniform grid on `[lo, hi]^dim` with `2^level + 1` points per axis.
///
/// The spacing `(hi - lo) / 2^level` must be positive; weights are the cell
/// measure `h^dim`.
pub fn grid_space_span(dim: usize, level: u32, lo: f64, hi: f64) -> Result<Arc<PointCloudSpace>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter {
            name: "dim",
            message: format!("grid dimension must be 1..=3, got {dim}"),
        });
    }
    if level == 0 || level > 14 {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("grid level must be 1..=14, got {level}"),
        });
    }
    if !(hi > lo) {
        return Err(Error::InvalidParameter {
            name: "span",
            message: format!("need hi > lo, got [{lo}, {hi}]"),
        });
    }
    let side = (1usize << level) + 1;
    let n = side.pow(dim as u32);
    if n > 2_000_000 {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("grid would have {n} points; refusing above 2e6"),
        });
    }
    let h = (hi - lo) / (1u64 << level) as f64;
    let axis: Vec<f64> = (0..side).map(|k| lo + k as f64 * h).collect();
    let mut coords = Vec::with_capacity(n * dim);
    match dim {
        1 => {
            for &x in &axis {
                coords.push(x);
            }
        }
        2 => {
            for &y in &axis {
                for &x in &axis {
                    coords.push(x);
                    coords.push(y);
                }
            }
        }
        3 => {
            for &z in &axis {
                for &y in &axis {
                    for &x in &axis {
                        coords.push(x);
                        coords.push(y);
                        coords.push(z);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let w = h.powi(dim as i32);
    Ok(Arc::new(PointCloudSpace::euclidean(
        coords,
        dim,
        vec![w; n],
        h,
    )?))
}

/// Integer corner of a gasket cell: (i, j) maps to the plane point
/// `(i + j/2, j·√3/2)` in lattice units.
type Corner = (i64, i64);

fn gasket_cells(level: u32) -> Vec<[Corner; 3]> {
    let top = 1i64 << level;
    let mut cells = vec![[(0, 0), (top, 0), (0, top)]];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 3);
        for [a, b, c] in cells {
            let mab = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
            let mbc = ((b.0 + c.0) / 2, (b.1 + c.1) / 2);
            let mca = ((c.0 + a.0) / 2, (c.1 + a.1) / 2);
            next.push([a, mab, mca]);
            next.push([mab, b, mbc]);
            next.push([mca, mbc, c]);
        }
        cells = next;
    }
    cells
}

/// Accumulate gasket corner masses into a deterministic (row-major) map.
fn accumulate_gasket(
    into: &mut BTreeMap<(i64, i64), f64>,
    level: u32,
    scale: i64,
    mass_per_corner: f64,
) {
    for [a, b, c] in gasket_cells(level) {
        for corner in [a, b, c] {
            // Key by (row, column) so iteration is row-major.
            let key = (corner.1 * scale, corner.0 * scale);
            *into.entry(key).or_insert(0.0) += mass_per_corner;
        }
    }
}

fn gasket_points_from_map(
    map: BTreeMap<(i64, i64), f64>,
    pitch: f64,
    resolution: f64,
) -> Result<Arc<PointCloudSpace>> {
    let n = map.len();
    let mut coords = Vec::with_capacity(2 * n);
    let mut weights = Vec::with_capacity(n);
    let half_root3 = 3.0f64.sqrt() / 2.0;
    for ((j, i), w) in map {
        let x = (i as f64 + 0.5 * j as f64) * pitch;
        let y = j as f64 * half_root3 * pitch;
        coords.push(x);
        coords.push(y);
        weights.push(w);
    }
    Ok(Arc::new(PointCloudSpace::euclidean(
        coords, 2, weights, resolution,
    )?))
}

/// Sierpinski-gasket prefractal at the given subdivision level: `3^level`
/// triangular cells of side `2^-level`, each cell's mass `3^-level` split
/// equally among its three corners.  Vertices shared by neighbouring cells
/// are merged with summed mass; total measure is exactly one.
pub fn sierpinski_gasket(level: u32) -> Result<Arc<PointCloudSpace>> {
    if level == 0 || level > 8 {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("gasket level must be 1..=8, got {level}"),
        });
    }
    let mass_per_corner = 3.0f64.powi(-(level as i32)) / 3.0;
    let mut map = BTreeMap::new();
    accumulate_gasket(&mut map, level, 1, mass_per_corner);
    let pitch = 0.5f64.powi(level as i32);
    gasket_points_from_map(map, pitch, pitch)
}

/// Union of dilates `2·T ∪ 4·T ∪ … ∪ 2^count·T` of the level-`level` gasket
/// prefractal `T`, the standard finite truncation of an unbounded gasket.
/// The dilate by `2^k` carries total mass `(2^k)^{log 3 / log 2} = 3^k`;
/// coinciding vertices of different dilates are merged with summed weights,
/// so the total measure is `Σ_k 3^k`.
pub fn dilated_gasket(level: u32, count: u32) -> Result<Arc<PointCloudSpace>> {
    if level == 0 || level > 8 {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("gasket level must be 1..=8, got {level}"),
        });
    }
    if count == 0 || count > 6 {
        return Err(Error::InvalidParameter {
            name: "count",
            message: format!("dilation count must be 1..=6, got {count}"),
        });
    }
    // Common lattice pitch: the finest dilate (k = 1) has vertex spacing
    // 2^(1-level).
    let pitch = 0.5f64.powi(level as i32 - 1);
    let mut map = BTreeMap::new();
    for k in 1..=count {
        let mass_per_corner = 3.0f64.powi(k as i32) * 3.0f64.powi(-(level as i32)) / 3.0;
        // Dilate-k vertices sit at 2^k × (level-`level` lattice): in units of
        // the common pitch that is a scale factor 2^(k-1).
        let scale = 1i64 << (k - 1);
        accumulate_gasket(&mut map, level, scale, mass_per_corner);
    }
    gasket_points_from_map(map, pitch, pitch)
}

/// Middle-thirds Cantor construction at the given level: the `2^level`
/// surviving intervals of length `3^-level`, each represented by its
/// midpoint with weight `2^-level`.
pub fn cantor_set(level: u32) -> Result<Arc<PointCloudSpace>> {
    if level == 0 || level > 16 {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("cantor level must be 1..=16, got {level}"),
        });
    }
    // Surviving intervals are [a, a+1]/3^level; generate the integers `a` in
    // ascending order.
    let mut starts: Vec<i64> = vec![0];
    for _ in 0..level {
        let mut next = Vec::with_capacity(starts.len() * 2);
        for a in starts {
            next.push(3 * a);
            next.push(3 * a + 2);
        }
        starts = next;
    }
    let denom = 3.0f64.powi(level as i32);
    let coords: Vec<f64> = starts.iter().map(|&a| (a as f64 + 0.5) / denom).collect();
    let n = coords.len();
    let w = 0.5f64.powi(level as i32);
    // Closest pair: midpoints of sibling intervals, two thirds-cells apart.
    let resolution = 2.0 / denom;
    Ok(Arc::new(PointCloudSpace::euclidean(
        coords,
        1,
        vec![w; n],
        resolution,
    )?))
}

/// Cartesian product `F × Y` with the max metric and product weights,
/// together with the embedding of `F ≅ F × {y₀}` (first `Y`-point) carrying
/// `F`'s weights as `μ`.
///
/// The product metric is materialised as a distance matrix, so the total
/// point count is capped at 2048.
pub fn product_space(
    f_space: &PointCloudSpace,
    y_space: &PointCloudSpace,
) -> Result<(Arc<PointCloudSpace>, SubsetEmbedding)> {
    let nf = f_space.len();
    let ny = y_space.len();
    let n = nf
        .checked_mul(ny)
        .ok_or_else(|| Error::InvalidParameter {
            name: "product",
            message: "point count overflow".into(),
        })?;
    if n > 2048 {
        return Err(Error::InvalidParameter {
            name: "product",
            message: format!("product would have {n} points; the distance matrix is capped at 2048"),
        });
    }
    let mut distances = vec![0.0; n * n];
    let idx = |s: usize, y: usize| s * ny + y;
    for s1 in 0..nf {
        for y1 in 0..ny {
            for s2 in 0..nf {
                for y2 in 0..ny {
                    let d = f_space.distance(s1, s2).max(y_space.distance(y1, y2));
                    distances[idx(s1, y1) * n + idx(s2, y2)] = d;
                }
            }
        }
    }
    let mut weights = Vec::with_capacity(n);
    for s in 0..nf {
        for y in 0..ny {
            weights.push(f_space.weight(s) * y_space.weight(y));
        }
    }
    let resolution = f_space.resolution().min(y_space.resolution());
    let product = Arc::new(PointCloudSpace::from_distance_matrix(
        distances, weights, resolution,
    )?);
    let subset: Vec<u32> = (0..nf).map(|s| idx(s, 0) as u32).collect();
    let mu: Vec<f64> = (0..nf).map(|s| f_space.weight(s)).collect();
    let emb = SubsetEmbedding::new(product.clone(), subset, mu)?;
    Ok((product, emb))
}

/// Indices of grid points whose coordinate along `axis` equals `value`
/// exactly.  Convenience selector for axis-aligned segments and slices.
pub fn axis_slice(space: &PointCloudSpace, axis: usize, value: f64) -> Result<Vec<u32>> {
    let dim = match space.metric() {
        Metric::Euclidean { dim } => *dim,
        Metric::Matrix { .. } => {
            return Err(Error::InvalidParameter {
                name: "space",
                message: "axis slices require Euclidean coordinates".into(),
            })
        }
    };
    if axis >= dim {
        return Err(Error::InvalidParameter {
            name: "axis",
            message: format!("axis {axis} out of range for dimension {dim}"),
        });
    }
    let coords = space.coords().expect("euclidean space has coords");
    let out: Vec<u32> = (0..space.len())
        .filter(|&i| coords[i * dim + axis] == value)
        .map(|i| i as u32)
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyInput("axis slice selected no points"));
    }
    Ok(out)
}

/// The standard trace-testbed: a 2-D grid with the bottom edge `y = 0` as
/// subset, carrying one-dimensional cell weights.
pub fn grid_with_bottom_edge(level: u32) -> Result<SubsetEmbedding> {
    let space = grid_space(2, level)?;
    let indices = axis_slice(&space, 1, 0.0)?;
    SubsetEmbedding::with_rule(space, indices, MuRule::LowerDimensionalCell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{estimate_regularity, quotient_exponent, RegularityParams};

    #[test]
    fn unit_grid_counts_and_weights() {
        let s = grid_space(1, 3).unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s.weight(0), 0.125);
        assert!((s.total_measure() - 9.0 / 8.0).abs() < 1e-15);
        assert_eq!(s.resolution(), 0.125);
        assert_eq!(s.diameter(), 1.0);

        let s2 = grid_space(2, 2).unwrap();
        assert_eq!(s2.len(), 25);
        assert!((s2.total_measure() - 25.0 / 16.0).abs() < 1e-15);
        assert!((s2.diameter() - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn span_grid_keeps_lattice_exactness() {
        let s = grid_space_span(1, 8, -1.0, 1.0).unwrap();
        assert_eq!(s.len(), 257);
        assert_eq!(s.resolution(), 2.0 / 256.0);
        assert!(s.lattice().is_some(), "dyadic span grids must stay on the exact lattice");
        assert_eq!(s.coord(128).unwrap()[0], 0.0);
    }

    // Frozen oracle: at level 1 the gasket has six vertices; each outer
    // corner belongs to one cell (mass 1/9), each edge midpoint to two
    // (mass 2/9).
    #[test]
    fn gasket_level_one_masses() {
        let s = sierpinski_gasket(1).unwrap();
        assert_eq!(s.len(), 6);
        let mut weights: Vec<f64> = (0..6).map(|i| s.weight(i)).collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in &weights[..3] {
            assert!((w - 1.0 / 9.0).abs() < 1e-15);
        }
        for w in &weights[3..] {
            assert!((w - 2.0 / 9.0).abs() < 1e-15);
        }
        assert!((s.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gasket_vertex_count_and_mass_formula() {
        // Vertices of the level-ℓ prefractal: 3(3^ℓ + 1)/2.
        for level in 1..=5u32 {
            let s = sierpinski_gasket(level).unwrap();
            let expect = 3 * (3usize.pow(level) + 1) / 2;
            assert_eq!(s.len(), expect, "level {level}");
            assert!((s.total_measure() - 1.0).abs() < 1e-12, "level {level}");
            assert!((s.diameter() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cantor_level_one_is_two_midpoints() {
        let s = cantor_set(1).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.coord(0).unwrap()[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.coord(1).unwrap()[0] - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.weight(0), 0.5);
    }

    #[test]
    fn dilated_gasket_total_mass_is_geometric_sum() {
        let s = dilated_gasket(3, 2).unwrap();
        // Σ_{k=1..2} 3^k = 12.
        assert!((s.total_measure() - 12.0).abs() < 1e-9);
        assert!((s.diameter() - 4.0).abs() < 1e-12);
        // Shared origin corner must have been merged: strictly fewer points
        // than two disjoint copies would give.
        let single = sierpinski_gasket(3).unwrap().len();
        assert!(s.len() < 2 * single);
    }

    #[test]
    fn grid_regularity_matches_dimension() {
        for (dim, level, expect) in [(1usize, 7u32, 1.0f64), (2, 5, 2.0)] {
            let s = grid_space(dim, level).unwrap();
            let params = RegularityParams::for_space(&s).unwrap();
            let report = estimate_regularity(&s, &params).unwrap();
            assert!(
                (report.fitted_exponent - expect).abs() < 0.05,
                "dim {dim}: fitted {} vs {expect}",
                report.fitted_exponent
            );
        }
    }

    #[test]
    fn gasket_regularity_matches_similarity_dimension() {
        let s = sierpinski_gasket(6).unwrap();
        let params = RegularityParams::for_space(&s).unwrap();
        let report = estimate_regularity(&s, &params).unwrap();
        let expect = 3.0f64.ln() / 2.0f64.ln();
        assert!(
            (report.fitted_exponent - expect).abs() < 0.1,
            "fitted {} vs {expect}",
            report.fitted_exponent
        );
    }

    #[test]
    fn cantor_regularity_matches_similarity_dimension() {
        let s = cantor_set(10).unwrap();
        let params = RegularityParams::for_space(&s).unwrap();
        let report = estimate_regularity(&s, &params).unwrap();
        let expect = 2.0f64.ln() / 3.0f64.ln();
        assert!(
            (report.fitted_exponent - expect).abs() < 0.1,
            "fitted {} vs {expect}",
            report.fitted_exponent
        );
    }

    #[test]
    fn dilated_gasket_regularity_over_midrange_radii() {
        let s = dilated_gasket(5, 4).unwrap();
        // Mid-range window: above the coarsest dilate's vertex spacing,
        // below the truncation diameter.
        // Plain median: a union of dilates has no outer boundary inside the
        // window, and mass-ranking would concentrate on the coarsest dilate,
        // whose pitch is too big for these radii.
        let params = RegularityParams {
            r_grid: crate::space::log_spaced(1.0, s.diameter() / 6.0, 10),
            sample_size: 128,
            seed: 7,
            trim: crate::space::TrimPolicy::None,
        };
        let report = estimate_regularity(&s, &params).unwrap();
        let expect = 3.0f64.ln() / 2.0f64.ln();
        assert!(
            (report.fitted_exponent - expect).abs() < 0.2,
            "fitted {} vs {expect}",
            report.fitted_exponent
        );
    }

    #[test]
    fn product_of_segments_has_square_balls() {
        let f = grid_space(1, 3).unwrap();
        let y = grid_space(1, 3).unwrap();
        let (xy, emb) = product_space(&f, &y).unwrap();
        assert_eq!(xy.len(), 81);
        // Max-metric ball = product of interval balls: counting oracle.
        let r = 0.3;
        let count = xy.ball(0, r).unwrap().len();
        let f_count = f.ball(0, r).unwrap().len();
        assert_eq!(count, f_count * f_count);
        // Product weights multiply.
        assert!((xy.total_measure() - f.total_measure() * y.total_measure()).abs() < 1e-12);
        assert_eq!(emb.len(), f.len());
    }

    #[test]
    fn product_quotient_exponent_matches_fibre_dimension() {
        // F = 1-D grid, Y = 1-D grid: quotient m(B)/μ(B∩F) grows like r^1.
        let f = grid_space(1, 5).unwrap();
        let y = grid_space(1, 5).unwrap();
        let (xy, emb) = product_space(&f, &y).unwrap();
        let params = RegularityParams {
            r_grid: crate::space::log_spaced(
                3.5 * xy.resolution(),
                xy.diameter() / 6.0,
                10,
            ),
            sample_size: 64,
            seed: 11,
            trim: crate::space::TrimPolicy::FullestHalf,
        };
        let report = quotient_exponent(&emb, &params).unwrap();
        assert!(
            (report.fitted_exponent - 1.0).abs() < 0.1,
            "fitted {}",
            report.fitted_exponent
        );
    }

    #[test]
    fn bottom_edge_embedding_has_unit_quotient_exponent() {
        let emb = grid_with_bottom_edge(5).unwrap();
        let params = RegularityParams::for_space(emb.parent()).unwrap();
        let report = quotient_exponent(&emb, &params).unwrap();
        assert!(
            (report.fitted_exponent - 1.0).abs() < 0.1,
            "fitted {}",
            report.fitted_exponent
        );
    }

    #[test]
    fn triangle_inequality_sampled_on_every_generator() {
        use rand::{Rng, SeedableRng};
        let spaces: Vec<Arc<PointCloudSpace>> = vec![
            grid_space(2, 3).unwrap(),
            sierpinski_gasket(3).unwrap(),
            cantor_set(5).unwrap(),
            product_space(&grid_space(1, 3).unwrap(), &cantor_set(3).unwrap())
                .unwrap()
                .0,
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for s in &spaces {
            let n = s.len();
            for _ in 0..10_000 {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                let c = rng.gen_range(0..n);
                let lhs = s.distance(a, c);
                let rhs = s.distance(a, b) + s.distance(b, c);
                assert!(lhs <= rhs + 1e-12, "triangle violated: {lhs} > {rhs}");
            }
        }
    }
}
